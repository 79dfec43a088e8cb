#include "emotion/trainer.hpp"

#include <algorithm>
#include <cstring>

#include "emotion/errors.hpp"
#include "emotion/rng.hpp"

namespace emotion {

Tensor gather_rows(const Tensor& stacked, const std::vector<std::size_t>& rows) {
  Shape shape = stacked.shape();
  const std::size_t stride = stacked.size() / shape[0];
  shape[0] = rows.size();
  Tensor out(shape);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::memcpy(out.data() + r * stride, stacked.data() + rows[r] * stride, stride * sizeof(float));
  }
  return out;
}

std::vector<double> train_epochs(ModelState& model, const Dataset& data, const OptimizerConfig& cfg,
                                 std::size_t epochs, LossKind loss, std::uint64_t rng_seed, Velocity* velocity) {
  cfg.validate();
  const std::size_t n = data.size();
  if (n == 0) throw UsageError("cannot train on an empty dataset");
  if (loss == LossKind::mse && data.targets.shape() != data.inputs.shape()) {
    throw DimensionError("MSE training needs targets shaped like inputs");
  }
  if (loss == LossKind::cross_entropy && data.labels.size() != n) {
    throw DimensionError("cross-entropy training needs one label per sample");
  }
  Velocity local;
  Velocity& vel = velocity ? *velocity : local;
  Gradients grads = zero_gradients(model);
  std::vector<double> history;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    Rng rng(derive_seed(rng_seed, model.meta.epochs));
    const std::vector<std::size_t> order = rng.permutation(n);
    double weighted = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      const std::vector<std::size_t> rows(order.begin() + start, order.begin() + end);
      ForwardResult fwd = forward(model, gather_rows(data.inputs, rows), true);
      LossResult l;
      if (loss == LossKind::mse) {
        l = mse_loss(fwd.output, gather_rows(data.targets, rows));
        backward_into(model, fwd.tape, l.grad, grads, GradientAt::output);
      } else {
        std::vector<std::size_t> targets;
        targets.reserve(rows.size());
        for (auto r : rows) targets.push_back(data.labels[r]);
        l = cross_entropy_batch(fwd.output, targets);
        backward_into(model, fwd.tape, l.grad, grads, GradientAt::softmax_input);
      }
      sgd_step(model, grads, cfg, vel);
      weighted += l.value * static_cast<double>(rows.size());
    }
    const double mean = weighted / static_cast<double>(n);
    history.push_back(mean);
    model.meta.loss_history.push_back(mean);
    ++model.meta.epochs;
  }
  return history;
}

}  // namespace emotion
