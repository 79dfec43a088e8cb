#include "emotion/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "emotion/errors.hpp"
#include "emotion/rng.hpp"
#include "emotion/trainer.hpp"

namespace emotion {

ModelSpec CnnConfig::model_spec() const {
  ModelSpec spec;
  spec.input_shape = {1, input_size, input_size};
  spec.seed = seed;
  for (std::size_t kernel : conv_kernel_sizes) {
    spec.layers.push_back(LayerSpec::conv(filters_per_conv, kernel, kernel));
    spec.layers.push_back(LayerSpec::act(Activation::relu));
    spec.layers.push_back(LayerSpec::maxpool(pool_window, pool_stride));
  }
  spec.layers.push_back(LayerSpec::flatten());
  spec.layers.push_back(LayerSpec::dense(fc_hidden));
  spec.layers.push_back(LayerSpec::act(Activation::relu));
  spec.layers.push_back(LayerSpec::dense(classes));
  spec.layers.push_back(LayerSpec::softmax());
  return spec;
}

std::vector<std::size_t> structural_layers(const ModelSpec& spec) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerKind kind = spec.layers[i].kind;
    if (kind == LayerKind::conv || kind == LayerKind::maxpool || kind == LayerKind::dense) out.push_back(i);
  }
  return out;
}

CnnModel build_cnn(const CnnConfig& config) {
  config.optimizer.validate();
  if (config.classes != kNumClasses) throw BuildError("the classifier head must have 7 outputs");
  CnnModel model;
  model.config = config;
  model.state = build_model(config.model_spec());
  return model;
}

namespace {

constexpr std::uint64_t kValidationSalt = 0x56414C4944ULL;
constexpr std::uint64_t kShuffleSalt = 0x434E4E2D5348ULL;

/// Per class, floor(n * fraction) samples (at least one when the class has
/// two or more) go to validation.
std::vector<bool> choose_validation(const std::vector<std::size_t>& labels, double fraction, std::uint64_t seed) {
  std::vector<bool> held(labels.size(), false);
  if (fraction <= 0.0) return held;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == c) members.push_back(i);
    }
    if (members.size() < 2) continue;
    auto take = static_cast<std::size_t>(std::floor(static_cast<double>(members.size()) * fraction));
    take = std::clamp<std::size_t>(take, 1, members.size() - 1);
    Rng rng(derive_seed(seed, c));
    rng.shuffle(std::span<std::size_t>(members));
    for (std::size_t k = 0; k < take; ++k) held[members[k]] = true;
  }
  return held;
}

std::vector<std::size_t> argmax_rows(const Tensor& probs) {
  const std::size_t n = probs.dim(0), classes = probs.dim(1);
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const float* row = probs.data() + i * classes;
    out[i] = static_cast<std::size_t>(std::max_element(row, row + classes) - row);
  }
  return out;
}

/// Forward in fixed-size chunks to bound tape-free memory use.
Tensor predict_batch(const CnnModel& model, const Tensor& patches) {
  const std::size_t n = patches.dim(0), classes = model.config.classes;
  Tensor probs({n, classes});
  constexpr std::size_t chunk = 256;
  for (std::size_t start = 0; start < n; start += chunk) {
    std::vector<std::size_t> rows;
    for (std::size_t i = start; i < std::min(n, start + chunk); ++i) rows.push_back(i);
    const Tensor out = forward(model.state, gather_rows(patches, rows)).output;
    std::copy(out.data(), out.data() + out.size(), probs.data() + start * classes);
  }
  return probs;
}

std::vector<Ranking> rank_rows(const Tensor& probs) {
  const std::size_t n = probs.dim(0), classes = probs.dim(1);
  std::vector<Ranking> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Ranking r(classes);
    for (std::size_t c = 0; c < classes; ++c) r[c] = c;
    const float* row = probs.data() + i * classes;
    std::stable_sort(r.begin(), r.end(), [&](std::size_t a, std::size_t b) { return row[a] > row[b]; });
    out[i] = std::move(r);
  }
  return out;
}

Tensor as_patch(const Tensor& patch, std::size_t size) {
  if (patch.shape() == Shape{1, size, size}) return patch;
  if (patch.shape() == Shape{size, size}) return patch.reshaped({1, size, size});
  throw DimensionError("patch must be [1," + std::to_string(size) + "," + std::to_string(size) + "], got " +
                       shape_to_string(patch.shape()));
}

}  // namespace

double patch_accuracy(const CnnModel& model, const Tensor& patches, const std::vector<std::size_t>& labels) {
  if (labels.empty()) return 0.0;
  const auto predicted = argmax_rows(predict_batch(model, patches));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predicted[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

void train_cnn(CnnModel& model, const Tensor& patches, const std::vector<std::size_t>& labels) {
  const CnnConfig& cfg = model.config;
  if (labels.empty()) throw UsageError("cannot train the CNN on an empty split");
  if (patches.dim(0) != labels.size()) throw DimensionError("one label per patch is required");

  const std::vector<bool> held = choose_validation(labels, cfg.validation_fraction, derive_seed(cfg.seed, kValidationSalt));
  std::vector<std::size_t> train_rows, val_rows;
  for (std::size_t i = 0; i < labels.size(); ++i) (held[i] ? val_rows : train_rows).push_back(i);
  Dataset train{gather_rows(patches, train_rows), {}, {}};
  for (auto r : train_rows) train.labels.push_back(labels[r]);
  Tensor val_inputs;
  std::vector<std::size_t> val_labels;
  if (val_rows.empty()) {
    val_inputs = train.inputs;
    val_labels = train.labels;
  } else {
    val_inputs = gather_rows(patches, val_rows);
    for (auto r : val_rows) val_labels.push_back(labels[r]);
  }

  Velocity velocity;
  ModelState best = model.state;
  bool have_best = model.best_block > 0;
  for (std::size_t run = 0; run < cfg.runs; ++run) {
    const auto losses = train_epochs(model.state, train, cfg.optimizer, cfg.epochs_per_run, LossKind::cross_entropy,
                                     derive_seed(cfg.seed, kShuffleSalt), &velocity);
    model.iterations += cfg.epochs_per_run;
    BlockLog entry;
    entry.block = model.log.size() + 1;
    entry.iterations = model.iterations;
    entry.train_loss = losses.empty() ? 0.0 : std::accumulate(losses.begin(), losses.end(), 0.0) / losses.size();
    entry.validation_accuracy = patch_accuracy(model, val_inputs, val_labels);
    model.log.push_back(entry);
    if (!have_best || entry.validation_accuracy > model.best_validation) {
      best = model.state;
      model.best_validation = entry.validation_accuracy;
      model.best_block = entry.block;
      have_best = true;
    }
  }
  if (have_best) {
    const std::uint64_t version = model.state.version;
    model.state = std::move(best);
    // Keep tapes recorded before the swap invalid.
    model.state.version = version + 1;
  }
}

void train_cnn(CnnModel& model, const DatasetManifest& manifest) {
  const Batch batch = load_batch(manifest, Split::train, false, true);
  if (batch.labels.empty()) throw UsageError("manifest has no training records");
  train_cnn(model, batch.inputs, batch.labels);
}

Tensor predict_patch(const CnnModel& model, const Tensor& patch) {
  return forward(model.state, as_patch(patch, model.config.input_size)).output;
}

std::vector<ClassConfidence> predict_image(const CnnModel& model, const GrayImage& image, std::size_t k) {
  if (k == 0 || k > model.config.classes) throw UsageError("k must lie in [1, 7], got " + std::to_string(k));
  const auto patches = extract_patches(image);
  const std::size_t side = model.config.input_size;
  Tensor batch({patches.size(), 1, side, side});
  for (std::size_t p = 0; p < patches.size(); ++p) {
    const Tensor& t = patches[p].tensor();
    std::copy(t.data(), t.data() + t.size(), batch.data() + p * side * side);
  }
  const Tensor probs = forward(model.state, batch).output;
  const std::size_t classes = model.config.classes;
  std::vector<double> mean(classes, 0.0);
  for (std::size_t p = 0; p < patches.size(); ++p) {
    for (std::size_t c = 0; c < classes; ++c) mean[c] += probs.data()[p * classes + c];
  }
  std::vector<ClassConfidence> ranked;
  for (std::size_t c = 0; c < classes; ++c) ranked.emplace_back(c, mean[c] / static_cast<double>(patches.size()));
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const ClassConfidence& a, const ClassConfidence& b) { return a.second > b.second; });
  ranked.resize(k);
  return ranked;
}

CnnEvaluation evaluate_cnn(const CnnModel& model, const DatasetManifest& manifest, std::size_t k,
                           const std::string& dataset_name) {
  const Batch batch = load_batch(manifest, Split::test, false, true);
  if (batch.labels.empty()) throw UsageError("test split is empty");
  const Tensor probs = predict_batch(model, batch.inputs);
  CnnEvaluation eval;
  eval.patch_level = make_report("Convolutional Neural Network, patch-level", dataset_name, batch.labels,
                                 rank_rows(probs), k);
  eval.patch_level.unit = "Patches";

  const std::size_t images = batch.labels.size() / kPatchesPerImage, classes = model.config.classes;
  Tensor mean({images, classes});
  std::vector<std::size_t> truths(images);
  for (std::size_t i = 0; i < images; ++i) {
    truths[i] = batch.labels[i * kPatchesPerImage];
    for (std::size_t c = 0; c < classes; ++c) {
      double s = 0.0;
      for (std::size_t p = 0; p < kPatchesPerImage; ++p) s += probs.data()[(i * kPatchesPerImage + p) * classes + c];
      mean.data()[i * classes + c] = static_cast<float>(s / kPatchesPerImage);
    }
  }
  eval.image_level = make_report("Convolutional Neural Network, image-level (mean of 16 patches)", dataset_name,
                                 truths, rank_rows(mean), k);
  return eval;
}

std::string format_training_log(const CnnModel& model) {
  std::string out = "block\titerations\ttrain_loss\tvalidation_accuracy\n";
  char line[128];
  for (const auto& e : model.log) {
    std::snprintf(line, sizeof line, "%zu\t%zu\t%.6f\t%.6f\n", e.block, e.iterations, e.train_loss,
                  e.validation_accuracy);
    out += line;
  }
  return out;
}

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

CnnConfig config_from_spec(const ModelSpec& spec) {
  CnnConfig cfg;
  cfg.seed = spec.seed;
  if (spec.input_shape.size() != 3 || spec.input_shape[0] != 1 || spec.input_shape[1] != spec.input_shape[2]) {
    throw CheckpointError("checkpoint is not a CNN: input shape " + shape_to_string(spec.input_shape));
  }
  cfg.input_size = spec.input_shape[1];
  std::size_t conv = 0;
  for (const auto& layer : spec.layers) {
    if (layer.kind == LayerKind::conv && conv < 3) {
      cfg.filters_per_conv = layer.filters;
      cfg.conv_kernel_sizes[conv++] = layer.kernel_h;
    } else if (layer.kind == LayerKind::maxpool) {
      cfg.pool_window = layer.window;
      cfg.pool_stride = layer.stride;
    }
  }
  for (const auto& layer : spec.layers) {
    if (layer.kind == LayerKind::dense) {
      cfg.fc_hidden = layer.units;
      break;
    }
  }
  if (cfg.model_spec() != spec) throw CheckpointError("checkpoint layer list is not the CNN layout");
  return cfg;
}

}  // namespace

void save_cnn(const CnnModel& model, const std::string& path) {
  const CnnConfig& c = model.config;
  CheckpointExtras extras = {
      {"family", "cnn"},
      {"learning_rate", fmt17(c.optimizer.learning_rate)},
      {"momentum", fmt17(c.optimizer.momentum)},
      {"batch_size", std::to_string(c.optimizer.batch_size)},
      {"epochs_per_run", std::to_string(c.epochs_per_run)},
      {"runs", std::to_string(c.runs)},
      {"validation_fraction", fmt17(c.validation_fraction)},
      {"iterations", std::to_string(model.iterations)},
      {"best_block", std::to_string(model.best_block)},
      {"best_validation", fmt17(model.best_validation)},
  };
  for (const auto& e : model.log) {
    extras.emplace_back("block", std::to_string(e.block) + " " + std::to_string(e.iterations) + " " +
                                     fmt17(e.train_loss) + " " + fmt17(e.validation_accuracy));
  }
  save_checkpoint(model.state, path, extras);
}

CnnModel load_cnn(const std::string& path) {
  LoadedCheckpoint loaded = load_checkpoint(path);
  if (loaded.extra("family") != "cnn") throw CheckpointError("'" + path + "' is not a CNN checkpoint");
  CnnModel model;
  try {
    model.config = config_from_spec(loaded.model.spec);
    model.config.optimizer.learning_rate = std::stof(loaded.extra("learning_rate", "0.01"));
    model.config.optimizer.momentum = std::stof(loaded.extra("momentum", "0.9"));
    model.config.optimizer.batch_size = std::stoul(loaded.extra("batch_size", "32"));
    model.config.epochs_per_run = std::stoul(loaded.extra("epochs_per_run", "20"));
    model.config.runs = std::stoul(loaded.extra("runs", "18"));
    model.config.validation_fraction = std::stod(loaded.extra("validation_fraction", "0.1"));
    model.iterations = std::stoul(loaded.extra("iterations", "0"));
    model.best_block = std::stoul(loaded.extra("best_block", "0"));
    model.best_validation = std::stod(loaded.extra("best_validation", "0"));
    for (const auto& [key, value] : loaded.extras) {
      if (key != "block") continue;
      std::istringstream in(value);
      BlockLog e;
      if (!(in >> e.block >> e.iterations >> e.train_loss >> e.validation_accuracy)) {
        throw CheckpointError("bad block log entry '" + value + "'");
      }
      model.log.push_back(e);
    }
  } catch (const std::logic_error& e) {
    throw CheckpointError("'" + path + "': bad CNN metadata (" + e.what() + ")");
  }
  model.state = std::move(loaded.model);
  return model;
}

}  // namespace emotion
