#pragma once

#include <cstddef>

#include "emotion/layers.hpp"

namespace emotion {

struct OptimizerConfig {
  float learning_rate = 0.01f;
  float momentum = 0.9f;
  std::size_t batch_size = 32;

  /// Throws UsageError unless lr > 0, momentum in [0,1) and batch_size > 0.
  void validate() const;
};

/// Momentum buffers, shaped like the model parameters once initialized.
struct Velocity {
  Gradients buffers;
};

/// v <- momentum * v - lr * g;  w <- w + v
void sgd_step(ModelState& model, const Gradients& gradients, const OptimizerConfig& cfg, Velocity& velocity);

}  // namespace emotion
