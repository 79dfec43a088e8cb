#include "emotion/layers.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

#include "emotion/errors.hpp"
#include "emotion/parallel.hpp"
#include "emotion/rng.hpp"

namespace emotion {

const char* layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv: return "conv";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::activation: return "activation";
    case LayerKind::flatten: return "flatten";
    case LayerKind::softmax: return "softmax";
  }
  return "?";
}

LayerSpec LayerSpec::dense(std::size_t units) {
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.units = units;
  return s;
}

LayerSpec LayerSpec::conv(std::size_t filters, std::size_t kernel_h, std::size_t kernel_w) {
  LayerSpec s;
  s.kind = LayerKind::conv;
  s.filters = filters;
  s.kernel_h = kernel_h;
  s.kernel_w = kernel_w;
  return s;
}

LayerSpec LayerSpec::maxpool(std::size_t window, std::size_t stride) {
  LayerSpec s;
  s.kind = LayerKind::maxpool;
  s.window = window;
  s.stride = stride;
  return s;
}

LayerSpec LayerSpec::act(Activation kind) {
  LayerSpec s;
  s.kind = LayerKind::activation;
  s.activation = kind;
  return s;
}

LayerSpec LayerSpec::flatten() {
  LayerSpec s;
  s.kind = LayerKind::flatten;
  return s;
}

LayerSpec LayerSpec::softmax() {
  LayerSpec s;
  s.kind = LayerKind::softmax;
  return s;
}

std::string LayerSpec::describe() const {
  std::ostringstream out;
  out << layer_kind_name(kind);
  switch (kind) {
    case LayerKind::dense: out << '(' << units << ')'; break;
    case LayerKind::conv: out << '(' << filters << ',' << kernel_h << 'x' << kernel_w << ')'; break;
    case LayerKind::maxpool: out << '(' << window << '/' << stride << ')'; break;
    case LayerKind::activation: out << '(' << activation_name(activation) << ')'; break;
    default: break;
  }
  return out.str();
}

std::size_t ModelState::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.weight.size() + p.bias.size();
  return n;
}

namespace {

std::string layer_label(const ModelSpec& spec, std::size_t i) {
  if (i == SIZE_MAX) return "input" + shape_to_string(spec.input_shape);
  return "layer " + std::to_string(i) + " " + spec.layers[i].describe();
}

[[noreturn]] void chain_break(const ModelSpec& spec, std::size_t i, const Shape& in, const std::string& why) {
  throw BuildError("shape chain breaks between " + layer_label(spec, i == 0 ? SIZE_MAX : i - 1) + " and " +
                   layer_label(spec, i) + ": " + why + " (incoming shape " + shape_to_string(in) + ")");
}

}  // namespace

std::vector<Shape> infer_shapes(const ModelSpec& spec) {
  if (spec.layers.empty()) throw BuildError("model spec has no layers");
  if (spec.input_shape.empty()) throw BuildError("model spec has no input shape");
  for (auto d : spec.input_shape) {
    if (d == 0) throw BuildError("model input shape " + shape_to_string(spec.input_shape) + " has a zero dimension");
  }
  std::vector<Shape> shapes;
  Shape current = spec.input_shape;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    switch (layer.kind) {
      case LayerKind::dense:
        if (current.size() != 1) chain_break(spec, i, current, "dense expects a rank-1 input");
        if (layer.units == 0) chain_break(spec, i, current, "dense needs at least one unit");
        current = {layer.units};
        break;
      case LayerKind::conv:
        if (current.size() != 3) chain_break(spec, i, current, "conv expects [c,h,w]");
        if (layer.filters == 0 || layer.kernel_h == 0 || layer.kernel_w == 0) {
          chain_break(spec, i, current, "conv needs positive filter count and kernel size");
        }
        if (layer.kernel_h > current[1] || layer.kernel_w > current[2]) {
          chain_break(spec, i, current, "kernel larger than input");
        }
        current = {layer.filters, current[1] - layer.kernel_h + 1, current[2] - layer.kernel_w + 1};
        break;
      case LayerKind::maxpool:
        if (current.size() != 3) chain_break(spec, i, current, "maxpool expects [c,h,w]");
        if (layer.window == 0 || layer.stride == 0 || layer.window > current[1] || layer.window > current[2] ||
            (current[1] - layer.window) % layer.stride != 0 || (current[2] - layer.window) % layer.stride != 0) {
          chain_break(spec, i, current, "pool window/stride does not tile the input");
        }
        current = {current[0], (current[1] - layer.window) / layer.stride + 1,
                   (current[2] - layer.window) / layer.stride + 1};
        break;
      case LayerKind::activation:
        break;
      case LayerKind::flatten:
        current = {shape_size(current)};
        break;
      case LayerKind::softmax:
        if (current.size() != 1) chain_break(spec, i, current, "softmax expects a rank-1 input");
        break;
    }
    shapes.push_back(current);
  }
  return shapes;
}

namespace {

std::atomic<std::uint64_t> next_model_id{1};

Shape with_batch(std::size_t batch, const Shape& sample) {
  Shape s{batch};
  s.insert(s.end(), sample.begin(), sample.end());
  return s;
}

}  // namespace

ModelState build_model(const ModelSpec& spec) {
  ModelState model;
  model.spec = spec;
  model.shapes = infer_shapes(spec);
  model.id = next_model_id++;
  Rng rng(spec.seed);
  Shape in = spec.input_shape;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    LayerParams p;
    double fan_in = 0, fan_out = 0;
    if (layer.kind == LayerKind::dense) {
      p.weight = Tensor({layer.units, in[0]});
      p.bias = Tensor({layer.units});
      fan_in = static_cast<double>(in[0]);
      fan_out = static_cast<double>(layer.units);
    } else if (layer.kind == LayerKind::conv) {
      p.weight = Tensor({layer.filters, in[0], layer.kernel_h, layer.kernel_w});
      p.bias = Tensor({layer.filters});
      const double area = static_cast<double>(layer.kernel_h * layer.kernel_w);
      fan_in = static_cast<double>(in[0]) * area;
      fan_out = static_cast<double>(layer.filters) * area;
    }
    if (layer.has_params()) {
      const double bound = std::sqrt(6.0 / (fan_in + fan_out));
      for (float& w : p.weight.values()) w = static_cast<float>(rng.uniform(-bound, bound));
    }
    model.params.push_back(std::move(p));
    in = model.shapes[i];
  }
  return model;
}

Gradients zero_gradients(const ModelState& model) {
  Gradients g;
  g.reserve(model.params.size());
  for (const auto& p : model.params) {
    LayerParams z;
    if (!p.weight.empty()) z.weight = Tensor(p.weight.shape());
    if (!p.bias.empty()) z.bias = Tensor(p.bias.shape());
    g.push_back(std::move(z));
  }
  return g;
}

namespace {

Tensor dense_forward(const Tensor& x, const LayerParams& p) {
  Tensor y = matmul_bt(x, p.weight);
  const std::size_t batch = y.dim(0), units = y.dim(1);
  for (std::size_t i = 0; i < batch; ++i) {
    for (std::size_t o = 0; o < units; ++o) y.data()[i * units + o] += p.bias[o];
  }
  return y;
}

Tensor conv_forward(const Tensor& x, const LayerParams& p, const Shape& out_sample) {
  const std::size_t batch = x.dim(0);
  Tensor y(with_batch(batch, out_sample));
  const std::size_t out_n = shape_size(out_sample);
  parallel_for(batch, [&](std::size_t i) {
    Tensor r = conv2d_valid(x.slice(i), p.weight, p.bias);
    std::copy(r.data(), r.data() + out_n, y.data() + i * out_n);
  });
  return y;
}

Tensor pool_forward(const Tensor& x, const LayerSpec& layer, const Shape& out_sample,
                    std::vector<std::size_t>* argmax) {
  const std::size_t batch = x.dim(0);
  Tensor y(with_batch(batch, out_sample));
  const std::size_t out_n = shape_size(out_sample);
  if (argmax) argmax->assign(batch * out_n, 0);
  parallel_for(batch, [&](std::size_t i) {
    PoolResult r = maxpool2(x.slice(i), layer.window, layer.stride);
    std::copy(r.output.data(), r.output.data() + out_n, y.data() + i * out_n);
    if (argmax) std::copy(r.argmax.begin(), r.argmax.end(), argmax->begin() + i * out_n);
  });
  return y;
}

Tensor softmax_rows(const Tensor& x) {
  const std::size_t batch = x.dim(0), n = x.dim(1);
  Tensor y(x.shape());
  for (std::size_t i = 0; i < batch; ++i) {
    Tensor row({n}, std::vector<float>(x.data() + i * n, x.data() + (i + 1) * n));
    Tensor s = softmax(row);
    std::copy(s.data(), s.data() + n, y.data() + i * n);
  }
  return y;
}

Tensor layer_forward(const ModelState& model, std::size_t i, const Tensor& x, std::vector<std::size_t>* argmax) {
  const LayerSpec& layer = model.spec.layers[i];
  const std::size_t batch = x.dim(0);
  switch (layer.kind) {
    case LayerKind::dense: return dense_forward(x, model.params[i]);
    case LayerKind::conv: return conv_forward(x, model.params[i], model.shapes[i]);
    case LayerKind::maxpool: return pool_forward(x, layer, model.shapes[i], argmax);
    case LayerKind::activation: return activate(x, layer.activation);
    case LayerKind::flatten: return x.reshaped(with_batch(batch, model.shapes[i]));
    case LayerKind::softmax: return softmax_rows(x);
  }
  throw UsageError("unknown layer kind");
}

/// Returns the batched view of `input` and whether it arrived unbatched.
std::pair<Tensor, bool> as_batch(const ModelState& model, const Tensor& input) {
  const Shape& expected = model.spec.input_shape;
  if (input.shape() == expected) return {input.reshaped(with_batch(1, expected)), true};
  if (input.rank() == expected.size() + 1 && Shape(input.shape().begin() + 1, input.shape().end()) == expected) {
    return {input, false};
  }
  throw DimensionError("model input must be " + shape_to_string(expected) + " or [n]+" + shape_to_string(expected) +
                       ", got " + shape_to_string(input.shape()));
}

}  // namespace

ForwardResult forward(const ModelState& model, const Tensor& input, bool record) {
  auto [x, single] = as_batch(model, input);
  ForwardResult result;
  Tape& tape = result.tape;
  const std::size_t layers = model.spec.layers.size();
  if (record) {
    tape.model_id = model.id;
    tape.model_version = model.version;
    tape.recorded = true;
    tape.batch = x.dim(0);
    tape.activations.reserve(layers + 1);
    tape.argmax.resize(layers);
    tape.activations.push_back(x);
  }
  for (std::size_t i = 0; i < layers; ++i) {
    x = layer_forward(model, i, x, record ? &tape.argmax[i] : nullptr);
    if (record) tape.activations.push_back(x);
  }
  result.output = single ? x.reshaped(model.output_shape()) : std::move(x);
  return result;
}

Tensor forward_prefix(const ModelState& model, const Tensor& input, std::size_t layer_count) {
  if (layer_count > model.spec.layers.size()) {
    throw UsageError("prefix of " + std::to_string(layer_count) + " layers exceeds model depth " +
                     std::to_string(model.spec.layers.size()));
  }
  auto [x, single] = as_batch(model, input);
  for (std::size_t i = 0; i < layer_count; ++i) x = layer_forward(model, i, x, nullptr);
  if (single) {
    const Shape& s = layer_count == 0 ? model.spec.input_shape : model.shapes[layer_count - 1];
    return x.reshaped(s);
  }
  return x;
}

namespace {

void dense_backward(const Tensor& x, const Tensor& dy, const LayerParams& p, LayerParams& g, Tensor* dx) {
  const std::size_t batch = dy.dim(0), units = dy.dim(1);
  matmul_at_into(dy, x, g.weight);
  for (std::size_t o = 0; o < units; ++o) {
    float s = 0.0f;
    for (std::size_t i = 0; i < batch; ++i) s += dy.data()[i * units + o];
    g.bias[o] = s;
  }
  if (dx) *dx = matmul(dy, p.weight);
}

void conv_backward(const Tensor& x, const Tensor& dy, const LayerParams& p, LayerParams& g, Tensor* dx) {
  const std::size_t batch = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t f = p.weight.dim(0), fh = p.weight.dim(2), fw = p.weight.dim(3);
  const std::size_t oh = dy.dim(2), ow = dy.dim(3);
  const float* xin = x.data();
  const float* dout = dy.data();
  parallel_for(f, [&](std::size_t fi) {
    float* gw = g.weight.data() + fi * c * fh * fw;
    std::fill_n(gw, c * fh * fw, 0.0f);
    float gb = 0.0f;
    for (std::size_t i = 0; i < batch; ++i) {
      const float* plane = dout + (i * f + fi) * oh * ow;
      for (std::size_t k = 0; k < oh * ow; ++k) gb += plane[k];
      for (std::size_t ci = 0; ci < c; ++ci) {
        const float* in = xin + (i * c + ci) * h * w;
        for (std::size_t ky = 0; ky < fh; ++ky) {
          for (std::size_t kx = 0; kx < fw; ++kx) {
            float s = 0.0f;
            for (std::size_t y = 0; y < oh; ++y) s += kernels::dot(plane + y * ow, in + (y + ky) * w + kx, ow);
            gw[(ci * fh + ky) * fw + kx] += s;
          }
        }
      }
    }
    g.bias[fi] = gb;
  });
  if (!dx) return;
  *dx = Tensor(x.shape());
  parallel_for(batch, [&](std::size_t i) {
    for (std::size_t fi = 0; fi < f; ++fi) {
      const float* plane = dout + (i * f + fi) * oh * ow;
      for (std::size_t ci = 0; ci < c; ++ci) {
        float* din = dx->data() + (i * c + ci) * h * w;
        const float* kernel = p.weight.data() + (fi * c + ci) * fh * fw;
        for (std::size_t ky = 0; ky < fh; ++ky) {
          for (std::size_t kx = 0; kx < fw; ++kx) {
            const float weight = kernel[ky * fw + kx];
            for (std::size_t y = 0; y < oh; ++y) kernels::axpy(weight, plane + y * ow, din + (y + ky) * w + kx, ow);
          }
        }
      }
    }
  });
}

Tensor activation_backward(Activation kind, const Tensor& x, const Tensor& y, const Tensor& dy) {
  Tensor dx(dy.shape());
  for (std::size_t k = 0; k < dy.size(); ++k) {
    switch (kind) {
      case Activation::relu: dx[k] = x[k] > 0.0f ? dy[k] : 0.0f; break;
      case Activation::sigmoid: dx[k] = dy[k] * y[k] * (1.0f - y[k]); break;
      case Activation::tanh: dx[k] = dy[k] * (1.0f - y[k] * y[k]); break;
    }
  }
  return dx;
}

Tensor softmax_backward(const Tensor& y, const Tensor& dy) {
  const std::size_t batch = y.dim(0), n = y.dim(1);
  Tensor dx(y.shape());
  for (std::size_t i = 0; i < batch; ++i) {
    const float* p = y.data() + i * n;
    const float* g = dy.data() + i * n;
    float inner = 0.0f;
    for (std::size_t k = 0; k < n; ++k) inner += p[k] * g[k];
    for (std::size_t k = 0; k < n; ++k) dx.data()[i * n + k] = p[k] * (g[k] - inner);
  }
  return dx;
}

}  // namespace

Gradients backward(const ModelState& model, const Tape& tape, const Tensor& loss_grad, GradientAt at,
                   Tensor* input_grad) {
  Gradients grads = zero_gradients(model);
  backward_into(model, tape, loss_grad, grads, at, input_grad);
  return grads;
}

void backward_into(const ModelState& model, const Tape& tape, const Tensor& loss_grad, Gradients& grads,
                   GradientAt at, Tensor* input_grad) {
  if (!tape.recorded) throw UsageError("backward needs a tape recorded by forward(..., record=true)");
  if (tape.model_id != model.id || tape.model_version != model.version) {
    throw UsageError("tape is stale: it was recorded against a different model or before a parameter update");
  }
  const std::size_t layers = model.spec.layers.size();
  std::size_t top = layers;
  if (at == GradientAt::softmax_input) {
    if (model.spec.layers.back().kind != LayerKind::softmax) {
      throw UsageError("softmax-input gradient requires a final softmax layer");
    }
    top = layers - 1;
  }
  const Tensor& top_activation = tape.activations[top];
  Tensor grad;
  if (loss_grad.shape() == top_activation.shape()) {
    grad = loss_grad;
  } else if (tape.batch == 1 && shape_size(loss_grad.shape()) == top_activation.size()) {
    grad = loss_grad.reshaped(top_activation.shape());
  } else {
    throw DimensionError("loss gradient " + shape_to_string(loss_grad.shape()) + " does not match layer output " +
                         shape_to_string(top_activation.shape()));
  }

  if (grads.size() != model.params.size()) throw DimensionError("gradient buffer does not match the model layers");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].weight.shape() != model.params[i].weight.shape() ||
        grads[i].bias.shape() != model.params[i].bias.shape()) {
      throw DimensionError("gradient buffer for layer " + std::to_string(i) + " has the wrong shape");
    }
  }
  for (std::size_t step = top; step-- > 0;) {
    const LayerSpec& layer = model.spec.layers[step];
    const Tensor& x = tape.activations[step];
    const Tensor& y = tape.activations[step + 1];
    const bool need_dx = step > 0 || input_grad != nullptr;
    Tensor dx;
    switch (layer.kind) {
      case LayerKind::dense:
        dense_backward(x, grad, model.params[step], grads[step], need_dx ? &dx : nullptr);
        break;
      case LayerKind::conv:
        conv_backward(x, grad, model.params[step], grads[step], need_dx ? &dx : nullptr);
        break;
      case LayerKind::maxpool: {
        dx = Tensor(x.shape());
        const auto& argmax = tape.argmax[step];
        const std::size_t in_n = x.size() / tape.batch, out_n = grad.size() / tape.batch;
        for (std::size_t i = 0; i < tape.batch; ++i) {
          for (std::size_t o = 0; o < out_n; ++o) {
            dx[i * in_n + argmax[i * out_n + o]] += grad[i * out_n + o];
          }
        }
        break;
      }
      case LayerKind::activation:
        dx = activation_backward(layer.activation, x, y, grad);
        break;
      case LayerKind::flatten:
        dx = grad.reshaped(x.shape());
        break;
      case LayerKind::softmax:
        dx = softmax_backward(y, grad);
        break;
    }
    if (!need_dx) break;
    grad = std::move(dx);
  }
  if (input_grad) *input_grad = std::move(grad);
}

}  // namespace emotion
