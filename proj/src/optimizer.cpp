#include "emotion/optimizer.hpp"

#include <cmath>
#include <string>

#include "emotion/errors.hpp"
#include "emotion/parallel.hpp"

namespace emotion {

void OptimizerConfig::validate() const {
  // lr == 0 is accepted so a step can be a deliberate no-op.
  if (!(learning_rate >= 0.0f) || !std::isfinite(learning_rate)) {
    throw UsageError("learning rate must be a non-negative finite number");
  }
  if (!(momentum >= 0.0f && momentum < 1.0f)) throw UsageError("momentum must lie in [0, 1)");
  if (batch_size == 0) throw UsageError("batch size must be positive");
}

namespace {

void update(Tensor& param, const Tensor& grad, Tensor& vel, float lr, float momentum) {
  if (grad.shape() != param.shape()) {
    throw DimensionError("gradient " + shape_to_string(grad.shape()) + " does not match parameter " +
                         shape_to_string(param.shape()));
  }
  constexpr std::size_t block = 1 << 14;
  const std::size_t n = param.size();
  parallel_for((n + block - 1) / block, [&](std::size_t b) {
    const std::size_t end = std::min(n, (b + 1) * block);
    float* w = param.data();
    float* v = vel.data();
    const float* g = grad.data();
    for (std::size_t i = b * block; i < end; ++i) {
      v[i] = momentum * v[i] - lr * g[i];
      w[i] += v[i];
    }
  });
}

}  // namespace

void sgd_step(ModelState& model, const Gradients& gradients, const OptimizerConfig& cfg, Velocity& velocity) {
  cfg.validate();
  if (gradients.size() != model.params.size()) {
    throw DimensionError("gradients cover " + std::to_string(gradients.size()) + " layers, model has " +
                         std::to_string(model.params.size()));
  }
  if (velocity.buffers.empty()) velocity.buffers = zero_gradients(model);
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    LayerParams& p = model.params[i];
    if (p.weight.empty()) continue;
    update(p.weight, gradients[i].weight, velocity.buffers[i].weight, cfg.learning_rate, cfg.momentum);
    update(p.bias, gradients[i].bias, velocity.buffers[i].bias, cfg.learning_rate, cfg.momentum);
  }
  ++model.version;
}

}  // namespace emotion
