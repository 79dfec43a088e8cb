#include "emotion/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "emotion/errors.hpp"

namespace emotion {

LossResult mse_loss(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) {
    throw DimensionError("mse_loss shape mismatch: prediction " + shape_to_string(pred.shape()) + ", target " +
                         shape_to_string(target.shape()));
  }
  LossResult r{0.0, Tensor(pred.shape())};
  const double n = static_cast<double>(pred.size());
  const float scale = static_cast<float>(2.0 / n);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const float diff = pred[i] - target[i];
    sum += static_cast<double>(diff) * diff;
    r.grad[i] = scale * diff;
  }
  r.value = sum / n;
  return r;
}

namespace {

double negative_log(float p) {
  return -std::log(std::max(static_cast<double>(p), static_cast<double>(std::numeric_limits<float>::min())));
}

}  // namespace

LossResult cross_entropy_loss(const Tensor& probabilities, std::size_t target_class) {
  if (probabilities.rank() != 1) {
    throw DimensionError("cross_entropy_loss expects a rank-1 probability vector, got " +
                         shape_to_string(probabilities.shape()));
  }
  if (target_class >= probabilities.size()) {
    throw DimensionError("target class " + std::to_string(target_class) + " out of range for " +
                         std::to_string(probabilities.size()) + " classes");
  }
  LossResult r{negative_log(probabilities[target_class]), probabilities};
  r.grad[target_class] -= 1.0f;
  return r;
}

LossResult cross_entropy_batch(const Tensor& probabilities, std::span<const std::size_t> targets) {
  if (probabilities.rank() != 2 || probabilities.dim(0) != targets.size()) {
    throw DimensionError("cross_entropy_batch expects [" + std::to_string(targets.size()) + ",classes], got " +
                         shape_to_string(probabilities.shape()));
  }
  const std::size_t batch = probabilities.dim(0), classes = probabilities.dim(1);
  LossResult r{0.0, probabilities};
  const float scale = 1.0f / static_cast<float>(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    if (targets[i] >= classes) {
      throw DimensionError("target class " + std::to_string(targets[i]) + " out of range for " +
                           std::to_string(classes) + " classes");
    }
    r.value += negative_log(probabilities[i * classes + targets[i]]);
    r.grad[i * classes + targets[i]] -= 1.0f;
  }
  for (float& g : r.grad.values()) g *= scale;
  r.value /= static_cast<double>(batch);
  return r;
}

}  // namespace emotion
