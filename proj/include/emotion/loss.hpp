#pragma once

#include <cstddef>
#include <span>

#include "emotion/tensor.hpp"

namespace emotion {

enum class LossKind { mse, cross_entropy };

struct LossResult {
  double value = 0.0;
  Tensor grad;
};

/// Mean squared error over all elements; grad = 2 (pred - target) / n.
LossResult mse_loss(const Tensor& pred, const Tensor& target);

/// -log p[target] for a softmax output. The gradient is the combined
/// softmax + cross-entropy gradient with respect to the logits, p - onehot.
LossResult cross_entropy_loss(const Tensor& probabilities, std::size_t target_class);

/// Mean cross-entropy over a batch of softmax rows [n, classes]; the
/// gradient is with respect to the logits and already divided by n.
LossResult cross_entropy_batch(const Tensor& probabilities, std::span<const std::size_t> targets);

}  // namespace emotion
