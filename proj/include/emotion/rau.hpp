#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "emotion/dataset.hpp"
#include "emotion/layers.hpp"
#include "emotion/metrics.hpp"
#include "emotion/optimizer.hpp"

namespace emotion {

inline constexpr std::size_t kFlatImageSize = kImageSize * kImageSize;
inline constexpr std::size_t kWideLayerSize = 2800;

enum class AutoencoderDepth {
  shallow,  // 4096 - k - 4096
  deep,     // 4096 - 2800 - k - 2800 - 4096
};

/// How a test image is turned into something comparable with the units.
enum class EmbedMode {
  /// Train a fresh seeded autoencoder on the image alone for a fixed number
  /// of iterations and take its code. Compared against every unit.
  fresh_autoencoder,
  /// Encode the image with each class's own encoder and compare with that
  /// class's unit.
  class_encoders,
};

const char* depth_name(AutoencoderDepth depth);
AutoencoderDepth parse_depth(const std::string& name);
const char* embed_mode_name(EmbedMode mode);
EmbedMode parse_embed_mode(const std::string& name);

struct AutoencoderConfig {
  AutoencoderDepth depth = AutoencoderDepth::deep;
  std::size_t code_size = 300;
  std::size_t epochs_per_class = 60;
  std::size_t embed_iterations = 100;
  OptimizerConfig optimizer{1.0f, 0.9f, 32};
  std::uint64_t seed = 1;
  EmbedMode embed_mode = EmbedMode::fresh_autoencoder;

  /// code_size in {300, 500}, epochs_per_class >= 1, valid optimizer.
  void validate() const;
  ModelSpec model_spec() const;
  /// Number of leading layers that map an image to its code.
  std::size_t encoder_layers() const;
};

struct RepresentationUnit {
  std::size_t label = 0;
  Tensor vector;
};

struct RauModel {
  AutoencoderConfig config;
  std::vector<ModelState> autoencoders;  // one per class, canonical order
  std::vector<RepresentationUnit> units;  // one per class, canonical order
};

/// Trains an autoencoder of the configured structure to reconstruct `images`
/// [n, 4096] under MSE for config.epochs_per_class epochs. Every class model
/// starts from the same seeded weights.
ModelState train_class_autoencoder(const Tensor& images, const AutoencoderConfig& config);

/// Center-layer activations [n, k] (or [k] for one unbatched image).
Tensor encode(const ModelState& autoencoder, const AutoencoderConfig& config, const Tensor& images);

/// Mean code of `images` under a trained class autoencoder.
RepresentationUnit compute_representation_unit(const ModelState& autoencoder, const AutoencoderConfig& config,
                                               const Tensor& images, std::size_t label);

/// Trains a fresh autoencoder (weights from `seed`) on this image alone for
/// config.embed_iterations epochs and returns its code [k].
Tensor embed_example(const Tensor& image, const AutoencoderConfig& config, std::uint64_t seed);

/// 1 - a.b / (|a||b|), clamped to [0, 2]. Throws NumericError when either
/// vector is zero.
double cosine_distance(const Tensor& a, const Tensor& b);

/// Trains one autoencoder per class on the manifest's train split and
/// derives the seven units.
RauModel train_rau(const DatasetManifest& manifest, const AutoencoderConfig& config);

/// Builds the model from per-class images ([n_c, 4096] each, canonical order).
RauModel train_rau(const std::vector<Tensor>& class_images, const AutoencoderConfig& config);

using ClassScore = std::pair<std::size_t, double>;

/// Distances from the image to every unit, ascending, ties in canonical
/// class order. Returns the first k.
std::vector<ClassScore> classify_topk(const RauModel& model, const Tensor& image, std::size_t k, std::uint64_t seed);

/// Same ranking given precomputed distances to each class.
std::vector<ClassScore> rank_by_distance(const std::vector<double>& distances, std::size_t k);

/// Top-1 and top-k report over the manifest's test split.
EvaluationReport evaluate_rau(const RauModel& model, const DatasetManifest& manifest, std::size_t k,
                              const std::string& dataset_name = "test split");

/// Directory layout: units.bin plus <class>.ckpt per class autoencoder.
///
/// units.bin is a text header
///
///   EMOTION-UNITS 1
///   classes anger sadness surprise happiness disgust fear neutral
///   k <code size>
///   structure shallow|deep
///   epochs_per_class <n>
///   embed_iterations <n>
///   embed_mode fresh|class
///   learning_rate <%.9g>
///   momentum <%.9g>
///   batch_size <n>
///   seed <u64>
///   payload_offset <20-digit byte offset>
///   end
///
/// followed by 7 x k little-endian float32 values, one unit per class in
/// canonical order.
void save_rau(const RauModel& model, const std::string& dir);
/// Loads units and config; class autoencoders are loaded when present and
/// are required for EmbedMode::class_encoders.
RauModel load_rau(const std::string& dir);

std::string encode_units(const RauModel& model);
RauModel decode_units(const std::string& bytes);

}  // namespace emotion
