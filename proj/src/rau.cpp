#include "emotion/rau.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "emotion/checkpoint.hpp"
#include "emotion/errors.hpp"
#include "emotion/parallel.hpp"
#include "emotion/rng.hpp"
#include "emotion/trainer.hpp"

namespace emotion {

const char* depth_name(AutoencoderDepth depth) { return depth == AutoencoderDepth::shallow ? "shallow" : "deep"; }

AutoencoderDepth parse_depth(const std::string& name) {
  if (name == "shallow") return AutoencoderDepth::shallow;
  if (name == "deep") return AutoencoderDepth::deep;
  throw UsageError("autoencoder structure must be 'shallow' or 'deep', got '" + name + "'");
}

const char* embed_mode_name(EmbedMode mode) { return mode == EmbedMode::fresh_autoencoder ? "fresh" : "class"; }

EmbedMode parse_embed_mode(const std::string& name) {
  if (name == "fresh") return EmbedMode::fresh_autoencoder;
  if (name == "class") return EmbedMode::class_encoders;
  throw UsageError("embed mode must be 'fresh' or 'class', got '" + name + "'");
}

void AutoencoderConfig::validate() const {
  if (code_size != 300 && code_size != 500) {
    throw UsageError("representation size must be 300 or 500, got " + std::to_string(code_size));
  }
  if (epochs_per_class == 0) throw UsageError("epochs per class must be positive");
  optimizer.validate();
}

ModelSpec AutoencoderConfig::model_spec() const {
  ModelSpec spec;
  spec.input_shape = {kFlatImageSize};
  spec.seed = seed;
  auto add = [&](std::size_t units) {
    spec.layers.push_back(LayerSpec::dense(units));
    spec.layers.push_back(LayerSpec::act(Activation::sigmoid));
  };
  if (depth == AutoencoderDepth::deep) add(kWideLayerSize);
  add(code_size);
  if (depth == AutoencoderDepth::deep) add(kWideLayerSize);
  add(kFlatImageSize);
  return spec;
}

std::size_t AutoencoderConfig::encoder_layers() const { return depth == AutoencoderDepth::deep ? 4 : 2; }

namespace {

void require_images(const Tensor& images, const char* what) {
  if (images.rank() != 2 || images.dim(1) != kFlatImageSize) {
    throw DimensionError(std::string(what) + " expects flattened images [n,4096], got " +
                         shape_to_string(images.shape()));
  }
}

void require_autoencoder(const ModelState& model, const AutoencoderConfig& config) {
  if (model.spec.layers != config.model_spec().layers) {
    throw UsageError("model is not a " + std::string(depth_name(config.depth)) + "/" +
                     std::to_string(config.code_size) + " autoencoder");
  }
}

constexpr std::uint64_t kShuffleSalt = 0x5241552D5348ULL;

}  // namespace

ModelState train_class_autoencoder(const Tensor& images, const AutoencoderConfig& config) {
  config.validate();
  if (images.empty()) throw UsageError("cannot train a class autoencoder on an empty class");
  require_images(images, "train_class_autoencoder");
  ModelState model = build_model(config.model_spec());
  Dataset data{images, images, {}};
  train_epochs(model, data, config.optimizer, config.epochs_per_class, LossKind::mse,
               derive_seed(config.seed, kShuffleSalt));
  return model;
}

Tensor encode(const ModelState& autoencoder, const AutoencoderConfig& config, const Tensor& images) {
  return forward_prefix(autoencoder, images, config.encoder_layers());
}

RepresentationUnit compute_representation_unit(const ModelState& autoencoder, const AutoencoderConfig& config,
                                               const Tensor& images, std::size_t label) {
  require_autoencoder(autoencoder, config);
  if (autoencoder.meta.epochs == 0) throw UsageError("representation units need a trained autoencoder");
  require_images(images, "compute_representation_unit");
  const Tensor codes = encode(autoencoder, config, images);
  const std::size_t n = codes.dim(0), k = codes.dim(1);
  std::vector<double> sum(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) sum[j] += codes.data()[i * k + j];
  }
  RepresentationUnit unit{label, Tensor({k})};
  for (std::size_t j = 0; j < k; ++j) unit.vector[j] = static_cast<float>(sum[j] / static_cast<double>(n));
  if (!unit.vector.all_finite()) throw NumericError("representation unit has non-finite entries");
  return unit;
}

Tensor embed_example(const Tensor& image, const AutoencoderConfig& config, std::uint64_t seed) {
  config.validate();
  if (image.size() != kFlatImageSize) {
    throw DimensionError("embed_example expects a flattened 64x64 image, got " + shape_to_string(image.shape()));
  }
  if (!image.all_finite()) throw NumericError("embed_example input has non-finite pixels");
  AutoencoderConfig local = config;
  local.seed = seed;
  ModelState model = build_model(local.model_spec());
  const Tensor batch = image.reshaped({1, kFlatImageSize});
  if (config.embed_iterations > 0) {
    OptimizerConfig opt = config.optimizer;
    opt.batch_size = 1;
    Dataset data{batch, batch, {}};
    train_epochs(model, data, opt, config.embed_iterations, LossKind::mse, derive_seed(seed, kShuffleSalt));
  }
  return encode(model, local, batch).reshaped({config.code_size});
}

double cosine_distance(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("cosine distance needs equal shapes, got " + shape_to_string(a.shape()) + " and " +
                         shape_to_string(b.shape()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw NumericError("cosine distance is undefined for a zero vector");
  const double d = 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(d, 0.0, 2.0);
}

RauModel train_rau(const std::vector<Tensor>& class_images, const AutoencoderConfig& config) {
  config.validate();
  if (class_images.size() != kNumClasses) {
    throw UsageError("RAU training needs images for all 7 classes, got " + std::to_string(class_images.size()));
  }
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (class_images[c].empty()) {
      throw UsageError("class '" + std::string(kClassNames[c]) + "' has no training images");
    }
  }
  RauModel model;
  model.config = config;
  model.autoencoders.resize(kNumClasses);
  model.units.resize(kNumClasses);
  parallel_for(kNumClasses, [&](std::size_t c) {
    model.autoencoders[c] = train_class_autoencoder(class_images[c], config);
    model.units[c] = compute_representation_unit(model.autoencoders[c], config, class_images[c], c);
  });
  return model;
}

RauModel train_rau(const DatasetManifest& manifest, const AutoencoderConfig& config) {
  const Batch batch = load_batch(manifest, Split::train, true, false);
  if (batch.labels.empty()) throw UsageError("manifest has no training records");
  std::vector<Tensor> per_class(kNumClasses);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < batch.labels.size(); ++i) {
      if (batch.labels[i] == c) rows.push_back(i);
    }
    if (!rows.empty()) per_class[c] = gather_rows(batch.inputs, rows);
  }
  return train_rau(per_class, config);
}

std::vector<ClassScore> rank_by_distance(const std::vector<double>& distances, std::size_t k) {
  if (k == 0 || k > distances.size()) {
    throw UsageError("k must lie in [1, " + std::to_string(distances.size()) + "], got " + std::to_string(k));
  }
  std::vector<ClassScore> ranked;
  for (std::size_t c = 0; c < distances.size(); ++c) ranked.emplace_back(c, distances[c]);
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const ClassScore& a, const ClassScore& b) { return a.second < b.second; });
  ranked.resize(k);
  return ranked;
}

std::vector<ClassScore> classify_topk(const RauModel& model, const Tensor& image, std::size_t k, std::uint64_t seed) {
  if (model.units.size() != kNumClasses) throw UsageError("RAU model must hold 7 representation units");
  if (k == 0 || k > kNumClasses) throw UsageError("k must lie in [1, 7], got " + std::to_string(k));
  std::vector<double> distances(kNumClasses);
  if (model.config.embed_mode == EmbedMode::fresh_autoencoder) {
    const Tensor code = embed_example(image, model.config, seed);
    for (std::size_t c = 0; c < kNumClasses; ++c) distances[c] = cosine_distance(code, model.units[c].vector);
  } else {
    if (model.autoencoders.size() != kNumClasses) {
      throw UsageError("class-encoder embedding needs all 7 class autoencoders");
    }
    if (image.size() != kFlatImageSize) {
      throw DimensionError("classification expects a flattened 64x64 image, got " + shape_to_string(image.shape()));
    }
    if (!image.all_finite()) throw NumericError("classification input has non-finite pixels");
    const Tensor flat = image.reshaped({kFlatImageSize});
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      distances[c] = cosine_distance(encode(model.autoencoders[c], model.config, flat), model.units[c].vector);
    }
  }
  return rank_by_distance(distances, k);
}

EvaluationReport evaluate_rau(const RauModel& model, const DatasetManifest& manifest, std::size_t k,
                              const std::string& dataset_name) {
  const Batch batch = load_batch(manifest, Split::test, true, false);
  if (batch.labels.empty()) throw UsageError("test split is empty");
  const std::size_t n = batch.labels.size();
  std::vector<Ranking> rankings(n);
  parallel_for(n, [&](std::size_t i) {
    for (const auto& [cls, distance] : classify_topk(model, batch.inputs.slice(i), kNumClasses, model.config.seed)) {
      rankings[i].push_back(cls);
    }
  });
  return make_report("Representational Autoencoder Units (" + std::string(depth_name(model.config.depth)) + ", " +
                         std::to_string(model.config.code_size) + " nodes)",
                     dataset_name, batch.labels, rankings, k);
}

namespace {

constexpr const char* kUnitsMagic = "EMOTION-UNITS 1";

std::string format_float(float v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
  return buf;
}

[[noreturn]] void bad_units(const std::string& why) { throw CheckpointError("corrupt units file: " + why); }

}  // namespace

std::string encode_units(const RauModel& model) {
  if (model.units.size() != kNumClasses) throw UsageError("RAU model must hold 7 representation units");
  const AutoencoderConfig& c = model.config;
  std::ostringstream head;
  head << kUnitsMagic << '\n' << "classes";
  for (auto name : kClassNames) head << ' ' << name;
  head << '\n';
  head << "k " << c.code_size << '\n';
  head << "structure " << depth_name(c.depth) << '\n';
  head << "epochs_per_class " << c.epochs_per_class << '\n';
  head << "embed_iterations " << c.embed_iterations << '\n';
  head << "embed_mode " << embed_mode_name(c.embed_mode) << '\n';
  head << "learning_rate " << format_float(c.optimizer.learning_rate) << '\n';
  head << "momentum " << format_float(c.optimizer.momentum) << '\n';
  head << "batch_size " << c.optimizer.batch_size << '\n';
  head << "seed " << c.seed << '\n';
  std::string header = head.str();
  const std::size_t offset = header.size() + std::strlen("payload_offset ") + 20 + 1 + std::strlen("end\n");
  char digits[21];
  std::snprintf(digits, sizeof digits, "%020zu", offset);
  std::string out = header + "payload_offset " + digits + "\nend\n";
  for (const auto& unit : model.units) {
    if (unit.vector.size() != c.code_size) throw UsageError("unit dimension disagrees with configured k");
    for (float v : unit.vector.values()) append_f32_le(out, v);
  }
  return out;
}

RauModel decode_units(const std::string& bytes) {
  std::istringstream in(bytes);
  std::string line;
  if (!std::getline(in, line) || line != kUnitsMagic) bad_units("missing magic line");
  RauModel model;
  AutoencoderConfig& c = model.config;
  std::size_t offset = 0;
  bool ended = false;
  while (std::getline(in, line)) {
    if (line == "end") {
      ended = true;
      break;
    }
    std::istringstream fields(line);
    std::string key, value;
    fields >> key >> value;
    try {
      if (key == "classes") {
        std::vector<std::string> names{value};
        std::string name;
        while (fields >> name) names.push_back(name);
        if (names.size() != kNumClasses) bad_units("expected 7 class names");
        for (std::size_t i = 0; i < kNumClasses; ++i) {
          if (names[i] != kClassNames[i]) bad_units("class order differs from canonical order");
        }
      } else if (key == "k") {
        c.code_size = std::stoul(value);
      } else if (key == "structure") {
        c.depth = parse_depth(value);
      } else if (key == "epochs_per_class") {
        c.epochs_per_class = std::stoul(value);
      } else if (key == "embed_iterations") {
        c.embed_iterations = std::stoul(value);
      } else if (key == "embed_mode") {
        c.embed_mode = parse_embed_mode(value);
      } else if (key == "learning_rate") {
        c.optimizer.learning_rate = std::stof(value);
      } else if (key == "momentum") {
        c.optimizer.momentum = std::stof(value);
      } else if (key == "batch_size") {
        c.optimizer.batch_size = std::stoul(value);
      } else if (key == "seed") {
        c.seed = std::stoull(value);
      } else if (key == "payload_offset") {
        offset = std::stoul(value);
      } else {
        bad_units("unknown header line '" + line + "'");
      }
    } catch (const CheckpointError&) {
      throw;
    } catch (const std::exception& e) {
      bad_units("bad value in line '" + line + "' (" + e.what() + ")");
    }
  }
  if (!ended) bad_units("header ends before 'end' line");
  const auto pos = static_cast<std::size_t>(in.tellg());
  if (offset != pos) bad_units("payload_offset does not match header length");
  try {
    c.validate();
  } catch (const UsageError& e) {
    bad_units(e.what());
  }
  const std::size_t need = kNumClasses * c.code_size * 4;
  if (bytes.size() - offset != need) {
    bad_units("payload holds " + std::to_string(bytes.size() - offset) + " bytes, expected " + std::to_string(need));
  }
  for (std::size_t cls = 0; cls < kNumClasses; ++cls) {
    RepresentationUnit unit{cls, Tensor({c.code_size})};
    for (std::size_t j = 0; j < c.code_size; ++j) {
      unit.vector[j] = read_f32_le(bytes.data() + offset + 4 * (cls * c.code_size + j));
    }
    model.units.push_back(std::move(unit));
  }
  return model;
}

void save_rau(const RauModel& model, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir + "': " + ec.message());
  write_file((fs::path(dir) / "units.bin").string(), encode_units(model));
  for (std::size_t c = 0; c < model.autoencoders.size(); ++c) {
    save_checkpoint(model.autoencoders[c], (fs::path(dir) / (std::string(kClassNames[c]) + ".ckpt")).string(),
                    {{"class", std::string(kClassNames[c])}});
  }
}

RauModel load_rau(const std::string& dir) {
  namespace fs = std::filesystem;
  const std::string units_path = (fs::path(dir) / "units.bin").string();
  RauModel model;
  try {
    model = decode_units(read_file(units_path));
  } catch (const CheckpointError& e) {
    throw CheckpointError("'" + units_path + "': " + e.what());
  }
  std::vector<ModelState> autoencoders;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const fs::path path = fs::path(dir) / (std::string(kClassNames[c]) + ".ckpt");
    if (!fs::exists(path)) break;
    ModelState ae = load_checkpoint(path.string()).model;
    require_autoencoder(ae, model.config);
    autoencoders.push_back(std::move(ae));
  }
  if (autoencoders.size() == kNumClasses) {
    model.autoencoders = std::move(autoencoders);
  } else if (model.config.embed_mode == EmbedMode::class_encoders) {
    throw CheckpointError("'" + dir + "' lacks the class autoencoder checkpoints needed for class-encoder mode");
  }
  return model;
}

}  // namespace emotion
