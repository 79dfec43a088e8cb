#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "emotion/image.hpp"
#include "emotion/tensor.hpp"

namespace emotion {

inline constexpr std::size_t kNumClasses = 7;

/// Canonical class order, shared by manifests, reports and model outputs.
inline constexpr std::array<std::string_view, kNumClasses> kClassNames = {
    "anger", "sadness", "surprise", "happiness", "disgust", "fear", "neutral"};
inline constexpr std::array<std::string_view, kNumClasses> kClassAbbrev = {"AN", "SA", "SU", "HA",
                                                                           "DI", "FE", "NE"};

/// Index of a class given its full name or two-letter abbreviation.
std::optional<std::size_t> class_index(std::string_view name);

enum class Split { unassigned, train, test };

std::string_view split_name(Split split);
std::optional<Split> parse_split(std::string_view name);

struct ManifestRecord {
  std::string path;
  std::size_t label = 0;
  Split split = Split::unassigned;

  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

/// Records in file order. Relative paths resolve against `base_dir`.
struct DatasetManifest {
  std::vector<ManifestRecord> records;
  std::string base_dir;

  std::string resolve(const ManifestRecord& record) const;
  std::size_t count(Split split) const;
  std::array<std::size_t, kNumClasses> class_counts(std::optional<Split> split = std::nullopt) const;
};

/// Manifest text grammar:
///
///   manifest := header record*
///   header   := "#classes" ("\t" class-name){7} "\n"     canonical order
///   record   := path "\t" class-name "\t" split "\n"
///   split    := "train" | "test" | "unassigned"
///
/// Blank lines are ignored. Paths may not contain tabs or newlines.
std::string format_manifest(const DatasetManifest& manifest);
DatasetManifest parse_manifest(const std::string& text, const std::string& base_dir = "");

DatasetManifest read_manifest(const std::string& path);
void write_manifest(const DatasetManifest& manifest, const std::string& path);

/// Stratified split. Each class sends floor(n * train_fraction) of its
/// records, clamped to [1, n-1], to train and the rest to test. Membership is
/// drawn from `seed`; record order is preserved.
DatasetManifest split_dataset(const DatasetManifest& manifest, double train_fraction, std::uint64_t seed);

struct Batch {
  Tensor inputs;
  std::vector<std::size_t> labels;
  /// Manifest record index of every sample.
  std::vector<std::size_t> sources;
};

/// Decodes every record of `split` (resizing to 64x64 when needed).
/// flatten -> [n, 4096]; augment -> [16n, 1, 48, 48] with labels repeated per
/// patch; neither -> [n, 1, 64, 64]. Sample order follows the manifest, then
/// patch order.
Batch load_batch(const DatasetManifest& manifest, Split split, bool flatten, bool augment);

/// Loads a record's image at 64x64.
GrayImage load_record_image(const DatasetManifest& manifest, const ManifestRecord& record);

}  // namespace emotion
