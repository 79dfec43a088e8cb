#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emotion/tensor.hpp"

namespace emotion {

enum class LayerKind { dense, conv, maxpool, activation, flatten, softmax };

const char* layer_kind_name(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::size_t units = 0;  // dense
  std::size_t filters = 0, kernel_h = 0, kernel_w = 0;  // conv
  std::size_t window = 0, stride = 0;  // maxpool
  Activation activation = Activation::relu;

  static LayerSpec dense(std::size_t units);
  static LayerSpec conv(std::size_t filters, std::size_t kernel_h, std::size_t kernel_w);
  static LayerSpec maxpool(std::size_t window, std::size_t stride);
  static LayerSpec act(Activation kind);
  static LayerSpec flatten();
  static LayerSpec softmax();

  bool has_params() const { return kind == LayerKind::dense || kind == LayerKind::conv; }
  std::string describe() const;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Ordered layer list applied to samples of `input_shape`.
struct ModelSpec {
  Shape input_shape;
  std::vector<LayerSpec> layers;
  std::uint64_t seed = 0;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Per-sample output shape of every layer. Throws BuildError naming the
/// first pair of layers that fails to chain.
std::vector<Shape> infer_shapes(const ModelSpec& spec);

/// Weight and bias of one layer; both empty for parameterless layers.
/// Dense weights are [out, in]; conv weights are [filters, channels, kh, kw].
struct LayerParams {
  Tensor weight;
  Tensor bias;

  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

struct TrainingMeta {
  std::size_t epochs = 0;
  std::vector<double> loss_history;

  friend bool operator==(const TrainingMeta&, const TrainingMeta&) = default;
};

struct ModelState {
  ModelSpec spec;
  std::vector<Shape> shapes;
  std::vector<LayerParams> params;
  TrainingMeta meta;
  /// Bumped by every parameter update; tapes remember the value they saw.
  std::uint64_t version = 0;
  std::uint64_t id = 0;

  std::size_t parameter_count() const;
  const Shape& output_shape() const { return shapes.back(); }
};

/// Same layer structure as ModelState::params.
using Gradients = std::vector<LayerParams>;

/// Initializes weights uniformly in +-sqrt(6/(fan_in+fan_out)) drawn from
/// spec.seed in layer order; biases start at zero.
ModelState build_model(const ModelSpec& spec);

/// Zero tensors shaped like the model's parameters.
Gradients zero_gradients(const ModelState& model);

/// Intermediates recorded by a forward pass for use by backward.
struct Tape {
  std::uint64_t model_id = 0;
  std::uint64_t model_version = 0;
  bool recorded = false;
  std::size_t batch = 0;
  /// activations[0] is the batched input; activations[i + 1] is layer i's output.
  std::vector<Tensor> activations;
  /// For maxpool layers: argmax per sample, flattened [batch * outputs].
  std::vector<std::vector<std::size_t>> argmax;
};

struct ForwardResult {
  Tensor output;
  Tape tape;
};

/// Accepts one sample shaped like spec.input_shape (output carries no batch
/// axis) or a batch [n, ...input_shape].
ForwardResult forward(const ModelState& model, const Tensor& input, bool record = false);

/// Runs the first `layer_count` layers only.
Tensor forward_prefix(const ModelState& model, const Tensor& input, std::size_t layer_count);

/// Where backward's incoming gradient applies.
enum class GradientAt {
  output,         // d loss / d final output
  softmax_input,  // d loss / d input of the final softmax layer (combined softmax+CE)
};

/// Gradients summed over the batch recorded in `tape`. When `input_grad` is
/// given it receives d loss / d input in batched shape.
Gradients backward(const ModelState& model, const Tape& tape, const Tensor& loss_grad,
                   GradientAt at = GradientAt::output, Tensor* input_grad = nullptr);

/// backward() writing into caller-owned gradients shaped like
/// zero_gradients(model); every entry is overwritten.
void backward_into(const ModelState& model, const Tape& tape, const Tensor& loss_grad, Gradients& grads,
                   GradientAt at = GradientAt::output, Tensor* input_grad = nullptr);

}  // namespace emotion
