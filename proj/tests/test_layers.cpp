#include <gtest/gtest.h>

#include <cmath>

#include "emotion/cnn.hpp"
#include "emotion/errors.hpp"
#include "emotion/layers.hpp"
#include "emotion/loss.hpp"
#include "emotion/optimizer.hpp"
#include "oracle.hpp"

using namespace emotion;

namespace {

void randomize(ModelState& m, Rng& rng) {
  for (auto& p : m.params) {
    for (auto& v : p.weight.values()) v = static_cast<float>(rng.uniform(-1, 1));
    for (auto& v : p.bias.values()) v = static_cast<float>(rng.uniform(-0.5, 0.5));
  }
}

oracle::Objective projection(const Shape& out, Rng& rng) {
  oracle::Objective o;
  o.weights = oracle::random_tensor(out, rng);
  return o;
}

Shape batched(std::size_t n, const Shape& s) {
  Shape b{n};
  b.insert(b.end(), s.begin(), s.end());
  return b;
}

/// Builds `spec`, randomizes it and runs one gradient check per draw.
void check_draws(const std::function<ModelSpec(Rng&)>& make, int draws, std::uint64_t seed,
                 std::size_t max_coords = 0) {
  Rng rng(seed);
  std::size_t checked = 0, skipped = 0;
  for (int d = 0; d < draws; ++d) {
    ModelSpec spec = make(rng);
    ModelState m = build_model(spec);
    randomize(m, rng);
    const std::size_t n = 1 + rng.below(3);
    const Tensor x = oracle::random_tensor(batched(n, spec.input_shape), rng);
    const auto r = oracle::check_gradients(m, x, projection(batched(n, m.output_shape()), rng), rng, max_coords);
    EXPECT_EQ(r.failed, 0u) << "draw " << d << " worst " << r.worst << " at " << r.worst_where;
    checked += r.checked;
    skipped += r.skipped;
  }
  EXPECT_GT(checked, 10 * skipped);
}

}  // namespace

TEST(BuildModel, ShallowAutoencoderShapes) {
  ModelSpec spec{{4096}, {LayerSpec::dense(300), LayerSpec::act(Activation::sigmoid), LayerSpec::dense(4096)}, 3};
  const ModelState m = build_model(spec);
  EXPECT_EQ(m.params[0].weight.shape(), (Shape{300, 4096}));
  EXPECT_EQ(m.params[0].bias.shape(), (Shape{300}));
  EXPECT_EQ(m.params[2].weight.shape(), (Shape{4096, 300}));
  EXPECT_EQ(m.params[2].bias.shape(), (Shape{4096}));
  EXPECT_EQ(m.parameter_count(), 300u * 4096 * 2 + 300 + 4096);
}

TEST(BuildModel, GlorotBoundsAndZeroBias) {
  const ModelState m = build_model({{20}, {LayerSpec::dense(30)}, 9});
  const double bound = std::sqrt(6.0 / 50.0);
  for (float v : m.params[0].weight.values()) EXPECT_LE(std::fabs(v), bound);
  for (float v : m.params[0].bias.values()) EXPECT_EQ(v, 0.0f);
}

TEST(BuildModel, EmptyAndBrokenChains) {
  EXPECT_THROW(build_model({{4}, {}, 1}), BuildError);
  try {
    build_model({{1, 6, 6}, {LayerSpec::conv(2, 3, 3), LayerSpec::conv(2, 5, 5)}, 1});
    FAIL();
  } catch (const BuildError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("conv"), std::string::npos) << msg;
  }
}

TEST(BuildModel, SameSeedSameWeights) {
  ModelSpec spec{{1, 10, 10}, {LayerSpec::conv(3, 3, 3), LayerSpec::flatten(), LayerSpec::dense(5)}, 77};
  EXPECT_EQ(build_model(spec).params, build_model(spec).params);
  spec.seed = 78;
  EXPECT_NE(build_model(spec).params, build_model({spec.input_shape, spec.layers, 77}).params);
}

TEST(Forward, ZeroWeightsGiveZeroOutput) {
  ModelState m = build_model({{5}, {LayerSpec::dense(3)}, 1});
  m.params[0].weight.fill(0.0f);
  EXPECT_EQ(forward(m, Tensor::from({1, 2, 3, 4, 5})).output, Tensor({3}));
}

TEST(Forward, CnnOutputIsSevenWayDistribution) {
  const CnnModel cnn = build_cnn(CnnConfig{});
  Rng rng(4);
  const Tensor x = oracle::random_tensor({1, 48, 48}, rng, 0, 1);
  const Tensor out = forward(cnn.state, x).output;
  ASSERT_EQ(out.shape(), (Shape{7}));
  double s = 0;
  for (float v : out.values()) s += v;
  EXPECT_NEAR(s, 1.0, 1e-6);
  EXPECT_EQ(out, forward(cnn.state, x).output);
}

TEST(Forward, ShapeMismatchThrows) {
  const ModelState m = build_model({{5}, {LayerSpec::dense(3)}, 1});
  EXPECT_THROW(forward(m, Tensor({4})), DimensionError);
}

TEST(Backward, StaleOrMissingTape) {
  ModelState m = build_model({{3}, {LayerSpec::dense(2)}, 1});
  Tape empty;
  EXPECT_THROW(backward(m, empty, Tensor({2})), UsageError);
  auto fwd = forward(m, Tensor::from({1, 2, 3}), true);
  Velocity v;
  sgd_step(m, backward(m, fwd.tape, Tensor({2}, 1.0f)), {0.1f, 0.0f, 1}, v);
  EXPECT_THROW(backward(m, fwd.tape, Tensor({2}, 1.0f)), UsageError);
  ModelState other = build_model({{3}, {LayerSpec::dense(2)}, 1});
  auto fwd2 = forward(other, Tensor::from({1, 2, 3}), true);
  EXPECT_THROW(backward(m, fwd2.tape, Tensor({2}, 1.0f)), UsageError);
}

TEST(Backward, ZeroLossGradGivesZeroGradients) {
  ModelState m = build_model({{1, 6, 6}, {LayerSpec::conv(2, 3, 3), LayerSpec::act(Activation::tanh),
                                          LayerSpec::flatten(), LayerSpec::dense(3)}, 2});
  Rng rng(3);
  auto fwd = forward(m, oracle::random_tensor({1, 6, 6}, rng), true);
  for (const auto& g : backward(m, fwd.tape, Tensor({3}))) {
    for (float v : g.weight.values()) EXPECT_EQ(v, 0.0f);
    for (float v : g.bias.values()) EXPECT_EQ(v, 0.0f);
  }
}

TEST(Backward, GradientShapesMatchParameters) {
  const CnnModel cnn = build_cnn(CnnConfig{});
  Rng rng(5);
  auto fwd = forward(cnn.state, oracle::random_tensor({2, 1, 48, 48}, rng), true);
  const Gradients g = backward(cnn.state, fwd.tape, Tensor({2, 7}, 1.0f));
  ASSERT_EQ(g.size(), cnn.state.params.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_EQ(g[i].weight.shape(), cnn.state.params[i].weight.shape());
    EXPECT_EQ(g[i].bias.shape(), cnn.state.params[i].bias.shape());
  }
}

TEST(GradientCheck, TwoLayerDenseWithTenWeights) {
  ModelSpec spec{{2}, {LayerSpec::dense(2), LayerSpec::act(Activation::sigmoid), LayerSpec::dense(3)}, 5};
  ModelState m = build_model(spec);
  ASSERT_EQ(m.params[0].weight.size() + m.params[2].weight.size(), 10u);
  Rng rng(6);
  randomize(m, rng);
  const auto r = oracle::check_gradients(m, oracle::random_tensor({1, 2}, rng), projection({1, 3}, rng), rng);
  EXPECT_EQ(r.failed, 0u) << r.worst_where;
  EXPECT_EQ(r.checked, 2u + 10 + 5);
}

TEST(GradientCheck, ConvOnSixBySixWithTwoFilters) {
  ModelState m = build_model({{1, 6, 6}, {LayerSpec::conv(2, 3, 3)}, 5});
  Rng rng(7);
  randomize(m, rng);
  const auto r = oracle::check_gradients(m, oracle::random_tensor({1, 1, 6, 6}, rng), projection({1, 2, 4, 4}, rng), rng);
  EXPECT_EQ(r.failed, 0u) << r.worst_where;
}

TEST(GradientCheck, DenseDraws) {
  check_draws([](Rng& r) {
    return ModelSpec{{1 + r.below(6)}, {LayerSpec::dense(1 + r.below(5))}, r.next()};
  }, 50, 100);
}

TEST(GradientCheck, ConvDraws) {
  check_draws([](Rng& r) {
    const std::size_t c = 1 + r.below(2), h = 3 + r.below(4), w = 3 + r.below(4);
    return ModelSpec{{c, h, w}, {LayerSpec::conv(1 + r.below(3), 1 + r.below(3), 1 + r.below(3))}, r.next()};
  }, 50, 101);
}

TEST(GradientCheck, MaxpoolDraws) {
  check_draws([](Rng& r) {
    return ModelSpec{{1 + r.below(2), 2 * (1 + r.below(3)), 2 * (1 + r.below(3))}, {LayerSpec::maxpool(2, 2)},
                     r.next()};
  }, 50, 102);
}

TEST(GradientCheck, ActivationDraws) {
  for (Activation a : {Activation::relu, Activation::sigmoid, Activation::tanh}) {
    SCOPED_TRACE(activation_name(a));
    check_draws([a](Rng& r) {
      return ModelSpec{{1 + r.below(8)}, {LayerSpec::act(a)}, r.next()};
    }, 50, 103 + static_cast<int>(a));
  }
}

TEST(GradientCheck, FlattenDraws) {
  check_draws([](Rng& r) {
    return ModelSpec{{1 + r.below(2), 1 + r.below(3), 1 + r.below(3)},
                     {LayerSpec::flatten(), LayerSpec::dense(1 + r.below(4))}, r.next()};
  }, 50, 106);
}

TEST(GradientCheck, SoftmaxDraws) {
  check_draws([](Rng& r) {
    return ModelSpec{{2 + r.below(6)}, {LayerSpec::softmax()}, r.next()};
  }, 50, 107);
}

TEST(GradientCheck, SoftmaxCrossEntropyDraws) {
  Rng rng(108);
  for (int d = 0; d < 50; ++d) {
    const std::size_t in = 1 + rng.below(5), classes = 2 + rng.below(6), n = 1 + rng.below(3);
    ModelState m = build_model({{in}, {LayerSpec::dense(classes), LayerSpec::softmax()}, rng.next()});
    randomize(m, rng);
    oracle::Objective o;
    o.kind = oracle::Objective::cross_entropy;
    for (std::size_t i = 0; i < n; ++i) o.labels.push_back(rng.below(classes));
    const auto r = oracle::check_gradients(m, oracle::random_tensor({n, in}, rng), o, rng);
    EXPECT_EQ(r.failed, 0u) << r.worst_where;
  }
}

TEST(GradientCheck, ReducedCnnEndToEnd) {
  CnnConfig cfg;
  cfg.filters_per_conv = 2;
  cfg.fc_hidden = 8;
  Rng rng(109);
  std::size_t checked = 0, skipped = 0;
  for (int d = 0; d < 50; ++d) {
    cfg.seed = rng.next();
    CnnModel cnn = build_cnn(cfg);
    for (auto& p : cnn.state.params) {
      for (auto& v : p.bias.values()) v = static_cast<float>(rng.uniform(-0.1, 0.1));
    }
    oracle::Objective o;
    o.kind = oracle::Objective::cross_entropy;
    o.labels = {rng.below(7)};
    const auto r = oracle::check_gradients(cnn.state, oracle::random_tensor({1, 1, 48, 48}, rng, 0, 1), o, rng, 40);
    EXPECT_EQ(r.failed, 0u) << "draw " << d << ": " << r.worst_where;
    checked += r.checked;
    skipped += r.skipped;
  }
  EXPECT_GT(checked, 10 * skipped);
}

TEST(MseLoss, HandValues) {
  const LossResult same = mse_loss(Tensor::from({0.3f, 0.7f}), Tensor::from({0.3f, 0.7f}));
  EXPECT_EQ(same.value, 0.0);
  EXPECT_EQ(same.grad, Tensor({2}));
  const LossResult r = mse_loss(Tensor::from({1, 0}), Tensor::from({0, 0}));
  EXPECT_DOUBLE_EQ(r.value, 0.5);
  EXPECT_EQ(r.grad, Tensor::from({1, 0}));
  EXPECT_THROW(mse_loss(Tensor({2}), Tensor({3})), DimensionError);
}

TEST(MseLoss, GradientMatchesFiniteDifferences) {
  Rng rng(20);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.below(8);
    Tensor p = oracle::random_tensor({n}, rng), t = oracle::random_tensor({n}, rng);
    const LossResult r = mse_loss(p, t);
    for (std::size_t i = 0; i < n; ++i) {
      auto loss_at = [&](double v) {
        double s = 0;
        for (std::size_t j = 0; j < n; ++j) {
          const double d = (j == i ? v : double(p[j])) - double(t[j]);
          s += d * d;
        }
        return s / double(n);
      };
      const double fd = (loss_at(p[i] + 1e-4) - loss_at(p[i] - 1e-4)) / 2e-4;
      EXPECT_NEAR(r.grad[i], fd, 1e-4);
    }
  }
}

TEST(CrossEntropy, UniformAndConfident) {
  const LossResult u = cross_entropy_loss(Tensor({7}, 1.0f / 7.0f), 3);
  EXPECT_NEAR(u.value, 1.9459, 1e-4);
  const LossResult c = cross_entropy_loss(Tensor::from({1e-7f, 1.0f - 1e-7f}), 1);
  EXPECT_NEAR(c.value, 0.0, 1e-6);
  EXPECT_THROW(cross_entropy_loss(Tensor({7}, 1.0f / 7.0f), 7), DimensionError);
}

TEST(CrossEntropy, CombinedGradientMatchesFiniteDifferencesThroughSoftmax) {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng.below(6), target = rng.below(n);
    const Tensor z = oracle::random_tensor({n}, rng, -3, 3);
    const LossResult r = cross_entropy_loss(softmax(z), target);
    auto loss_at = [&](std::size_t i, double v) {
      double denom = 0;
      for (std::size_t j = 0; j < n; ++j) denom += std::exp(j == i ? v : double(z[j]));
      return -((target == i ? v : double(z[target])) - std::log(denom));
    };
    for (std::size_t i = 0; i < n; ++i) {
      const double fd = (loss_at(i, z[i] + 1e-4) - loss_at(i, z[i] - 1e-4)) / 2e-4;
      EXPECT_NEAR(r.grad[i], fd, 1e-3);
    }
  }
}

TEST(Sgd, ScalarStepNoOpAndMomentumRecurrence) {
  ModelState m = build_model({{1}, {LayerSpec::dense(1)}, 1});
  m.params[0].weight[0] = 1.0f;
  Gradients g = zero_gradients(m);
  g[0].weight[0] = 1.0f;
  Velocity v;
  sgd_step(m, g, {0.1f, 0.0f, 1}, v);
  EXPECT_FLOAT_EQ(m.params[0].weight[0], 0.9f);

  const auto before = m.params;
  Velocity v0;
  sgd_step(m, g, {0.0f, 0.9f, 1}, v0);
  EXPECT_EQ(m.params, before);

  m.params[0].weight[0] = 1.0f;
  Velocity vm;
  const OptimizerConfig cfg{0.1f, 0.9f, 1};
  g[0].weight[0] = 2.0f;
  sgd_step(m, g, cfg, vm);
  g[0].weight[0] = -1.0f;
  sgd_step(m, g, cfg, vm);
  // v1 = -0.2, w1 = 0.8; v2 = 0.9*-0.2 + 0.1 = -0.08, w2 = 0.72
  EXPECT_NEAR(m.params[0].weight[0], 0.72f, 1e-6);
}

TEST(Sgd, ConfigValidation) {
  EXPECT_THROW((OptimizerConfig{-0.1f, 0.9f, 1}.validate()), UsageError);
  EXPECT_THROW((OptimizerConfig{0.1f, 1.0f, 1}.validate()), UsageError);
  EXPECT_THROW((OptimizerConfig{0.1f, 0.5f, 0}.validate()), UsageError);
}

TEST(Sgd, StrictlyDecreasesConvexQuadratic) {
  // loss = |W x - t|^2 for a single dense layer is convex in W.
  Rng rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    ModelState m = build_model({{4}, {LayerSpec::dense(3)}, rng.next()});
    const Tensor x = oracle::random_tensor({1, 4}, rng), t = oracle::random_tensor({1, 3}, rng);
    Velocity v;
    double prev = mse_loss(forward(m, x).output, t).value;
    for (int step = 0; step < 10; ++step) {
      auto fwd = forward(m, x, true);
      sgd_step(m, backward(m, fwd.tape, mse_loss(fwd.output, t).grad), {0.05f, 0.0f, 1}, v);
      const double now = mse_loss(forward(m, x).output, t).value;
      EXPECT_LT(now, prev);
      prev = now;
    }
  }
}
