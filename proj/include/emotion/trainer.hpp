#pragma once

#include <cstdint>
#include <vector>

#include "emotion/layers.hpp"
#include "emotion/loss.hpp"
#include "emotion/optimizer.hpp"

namespace emotion {

/// Samples stacked along the leading axis. MSE training reads `targets`
/// (same shape as `inputs`); cross-entropy training reads `labels`.
struct Dataset {
  Tensor inputs;
  Tensor targets;
  std::vector<std::size_t> labels;

  std::size_t size() const { return inputs.empty() ? 0 : inputs.dim(0); }
};

/// Copies the listed samples of a stacked tensor into a new batch.
Tensor gather_rows(const Tensor& stacked, const std::vector<std::size_t>& rows);

/// Runs `epochs` passes of minibatch SGD. Each epoch visits the samples in
/// an order drawn from rng_seed and the epoch number only. Returns the mean
/// loss of every epoch and appends it to model.meta.
std::vector<double> train_epochs(ModelState& model, const Dataset& data, const OptimizerConfig& cfg,
                                 std::size_t epochs, LossKind loss, std::uint64_t rng_seed,
                                 Velocity* velocity = nullptr);

}  // namespace emotion
