#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "emotion/checkpoint.hpp"
#include "emotion/dataset.hpp"
#include "emotion/image.hpp"
#include "emotion/layers.hpp"
#include "emotion/metrics.hpp"
#include "emotion/optimizer.hpp"

namespace emotion {

struct CnnConfig {
  std::size_t filters_per_conv = 10;
  std::array<std::size_t, 3> conv_kernel_sizes = {5, 5, 4};
  std::size_t pool_window = 2;
  std::size_t pool_stride = 2;
  std::size_t fc_hidden = 64;
  std::size_t classes = kNumClasses;
  std::size_t input_size = kPatchSize;
  OptimizerConfig optimizer{0.01f, 0.9f, 32};
  std::size_t epochs_per_run = 20;
  std::size_t runs = 18;
  /// Stratified share of training patches held out to pick the best block.
  double validation_fraction = 0.1;
  std::uint64_t seed = 1;

  /// conv-relu-pool x3, flatten, dense-relu, dense, softmax.
  ModelSpec model_spec() const;
};

struct BlockLog {
  std::size_t block = 0;       // 1-based
  std::size_t iterations = 0;  // cumulative epochs after this block
  double train_loss = 0.0;     // mean over the block's epochs
  double validation_accuracy = 0.0;
};

struct CnnModel {
  CnnConfig config;
  ModelState state;
  std::vector<BlockLog> log;
  std::size_t iterations = 0;
  std::size_t best_block = 0;  // 0 = untrained
  double best_validation = 0.0;
};

/// Throws BuildError when the shape chain does not close.
CnnModel build_cnn(const CnnConfig& config);

/// Spec layer indices of the conv, pool and dense layers, in order. The
/// 1-based position in this list is the structural layer number.
std::vector<std::size_t> structural_layers(const ModelSpec& spec);

/// Trains in blocks of config.epochs_per_run epochs, config.runs times, on
/// patch samples [n,1,48,48]. After every block the patch-level accuracy on
/// the held-out validation share is logged; the weights of the best block
/// (earliest on ties) are kept. With no validation samples the training
/// samples are scored instead.
void train_cnn(CnnModel& model, const Tensor& patches, const std::vector<std::size_t>& labels);
/// Loads the train split with patch augmentation, then trains.
void train_cnn(CnnModel& model, const DatasetManifest& manifest);

/// Class probabilities [7] for one patch [1,48,48] (or [48,48]).
Tensor predict_patch(const CnnModel& model, const Tensor& patch);

using ClassConfidence = std::pair<std::size_t, double>;

/// Mean of the 16 patch probabilities, top k by descending confidence,
/// ties in canonical class order.
std::vector<ClassConfidence> predict_image(const CnnModel& model, const GrayImage& image, std::size_t k);

struct CnnEvaluation {
  EvaluationReport patch_level;  // every patch scored on its own
  EvaluationReport image_level;  // mean patch probabilities per image
};

CnnEvaluation evaluate_cnn(const CnnModel& model, const DatasetManifest& manifest, std::size_t k,
                           const std::string& dataset_name = "test split");

/// Patch-level top-1 accuracy on stacked samples.
double patch_accuracy(const CnnModel& model, const Tensor& patches, const std::vector<std::size_t>& labels);

/// One line per block: block, iterations, train loss, validation accuracy,
/// tab separated, after a header line.
std::string format_training_log(const CnnModel& model);

void save_cnn(const CnnModel& model, const std::string& path);
CnnModel load_cnn(const std::string& path);

}  // namespace emotion
