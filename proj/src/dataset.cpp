#include "emotion/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <sstream>

#include "emotion/checkpoint.hpp"
#include "emotion/errors.hpp"
#include "emotion/parallel.hpp"
#include "emotion/rng.hpp"

namespace emotion {

std::optional<std::size_t> class_index(std::string_view name) {
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (name == kClassNames[i] || name == kClassAbbrev[i]) return i;
  }
  return std::nullopt;
}

std::string_view split_name(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::test: return "test";
    case Split::unassigned: return "unassigned";
  }
  return "?";
}

std::optional<Split> parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "test") return Split::test;
  if (name == "unassigned") return Split::unassigned;
  return std::nullopt;
}

std::string DatasetManifest::resolve(const ManifestRecord& record) const {
  std::filesystem::path p(record.path);
  if (p.is_absolute() || base_dir.empty()) return p.string();
  return (std::filesystem::path(base_dir) / p).string();
}

std::size_t DatasetManifest::count(Split split) const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [&](const ManifestRecord& r) { return r.split == split; }));
}

std::array<std::size_t, kNumClasses> DatasetManifest::class_counts(std::optional<Split> split) const {
  std::array<std::size_t, kNumClasses> counts{};
  for (const auto& r : records) {
    if (!split || r.split == *split) ++counts[r.label];
  }
  return counts;
}

std::string format_manifest(const DatasetManifest& manifest) {
  std::string out = "#classes";
  for (auto name : kClassNames) {
    out += '\t';
    out += name;
  }
  out += '\n';
  for (const auto& r : manifest.records) {
    if (r.path.find_first_of("\t\n") != std::string::npos) {
      throw IoError("manifest path '" + r.path + "' contains a tab or newline");
    }
    out += r.path;
    out += '\t';
    out += kClassNames.at(r.label);
    out += '\t';
    out += split_name(r.split);
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

}  // namespace

DatasetManifest parse_manifest(const std::string& text, const std::string& base_dir) {
  DatasetManifest manifest;
  manifest.base_dir = base_dir;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    const std::string where = "manifest line " + std::to_string(line_no);
    if (!header) {
      if (fields.size() != kNumClasses + 1 || fields[0] != "#classes") {
        throw IoError(where + ": expected '#classes' header with 7 class names");
      }
      for (std::size_t i = 0; i < kNumClasses; ++i) {
        if (fields[i + 1] != kClassNames[i]) {
          throw IoError(where + ": class " + std::to_string(i) + " must be '" + std::string(kClassNames[i]) +
                        "', got '" + fields[i + 1] + "'");
        }
      }
      header = true;
      continue;
    }
    if (fields.size() != 3) throw IoError(where + ": expected path, label and split separated by tabs");
    const auto label = class_index(fields[1]);
    if (!label) throw IoError(where + ": unknown class '" + fields[1] + "'");
    const auto split = parse_split(fields[2]);
    if (!split) throw IoError(where + ": unknown split '" + fields[2] + "'");
    if (fields[0].empty()) throw IoError(where + ": empty path");
    manifest.records.push_back({fields[0], *label, *split});
  }
  if (!header) throw IoError("manifest has no '#classes' header");
  return manifest;
}

DatasetManifest read_manifest(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return parse_manifest(text, std::filesystem::path(path).parent_path().string());
  } catch (const IoError& e) {
    throw IoError("'" + path + "': " + e.what());
  }
}

void write_manifest(const DatasetManifest& manifest, const std::string& path) {
  write_file(path, format_manifest(manifest));
}

DatasetManifest split_dataset(const DatasetManifest& manifest, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw SplitError("train fraction must lie strictly between 0 and 1, got " + std::to_string(train_fraction));
  }
  std::array<std::vector<std::size_t>, kNumClasses> members;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) members[manifest.records[i].label].push_back(i);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (members[c].size() < 2) {
      throw SplitError("class '" + std::string(kClassNames[c]) + "' has " + std::to_string(members[c].size()) +
                       " record(s); stratified splitting needs at least 2");
    }
  }
  DatasetManifest out = manifest;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const std::size_t n = members[c].size();
    const auto floored = static_cast<std::size_t>(std::floor(static_cast<double>(n) * train_fraction));
    const std::size_t train = std::clamp<std::size_t>(floored, 1, n - 1);
    std::vector<std::size_t> order = members[c];
    Rng rng(derive_seed(seed, c));
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t k = 0; k < n; ++k) out.records[order[k]].split = k < train ? Split::train : Split::test;
  }
  return out;
}

GrayImage load_record_image(const DatasetManifest& manifest, const ManifestRecord& record) {
  const std::string path = manifest.resolve(record);
  GrayImage image;
  try {
    image = load_image(path);
  } catch (const DecodeError&) {
    throw;
  } catch (const Error& e) {
    throw IoError("cannot load '" + path + "': " + e.what());
  }
  if (image.height() != kImageSize || image.width() != kImageSize) {
    image = resize_bilinear(image, kImageSize, kImageSize);
  }
  return image;
}

Batch load_batch(const DatasetManifest& manifest, Split split, bool flatten, bool augment) {
  std::vector<std::size_t> chosen;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    if (manifest.records[i].split == split) chosen.push_back(i);
  }
  Batch batch;
  if (chosen.empty()) return batch;

  const std::size_t per_image = augment ? kPatchesPerImage : 1;
  const std::size_t side = augment ? kPatchSize : kImageSize;
  const std::size_t sample = side * side;
  const std::size_t n = chosen.size() * per_image;
  Shape shape = flatten ? Shape{n, sample} : Shape{n, 1, side, side};
  batch.inputs = Tensor(shape);
  batch.labels.resize(n);
  batch.sources.resize(n);

  parallel_for(chosen.size(), [&](std::size_t k) {
    const ManifestRecord& record = manifest.records[chosen[k]];
    const GrayImage image = load_record_image(manifest, record);
    std::vector<GrayImage> views;
    if (augment) {
      views = extract_patches(image);
    } else {
      views.push_back(image);
    }
    for (std::size_t v = 0; v < views.size(); ++v) {
      const std::size_t row = k * per_image + v;
      std::memcpy(batch.inputs.data() + row * sample, views[v].tensor().data(), sample * sizeof(float));
      batch.labels[row] = record.label;
      batch.sources[row] = chosen[k];
    }
  });
  return batch;
}

}  // namespace emotion
