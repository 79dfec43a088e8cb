#include "emotion/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>

#include "emotion/errors.hpp"
#include "emotion/rng.hpp"

namespace emotion {

namespace {

double segment_distance(double px, double py, double half_length) {
  // Distance from (px, py) to the segment from (-half_length, 0) to (half_length, 0).
  const double x = std::clamp(px, -half_length, half_length);
  return std::hypot(px - x, py);
}

/// Glyph coverage in [0, 1] at glyph-local coordinates (x, y).
double glyph(std::size_t label, double x, double y) {
  constexpr double soft = 1.5;
  auto edge = [](double distance, double radius) { return std::clamp((radius - distance) / soft + 0.5, 0.0, 1.0); };
  switch (label) {
    case 0: return edge(segment_distance(x, y, 18.0), 4.0);
    case 1: return edge(segment_distance(y, x, 18.0), 4.0);
    case 2: return edge(segment_distance((x + y) / std::numbers::sqrt2, (y - x) / std::numbers::sqrt2, 18.0), 4.0);
    case 3: return edge(segment_distance((x - y) / std::numbers::sqrt2, (x + y) / std::numbers::sqrt2, 18.0), 4.0);
    case 4: return edge(std::hypot(x, y), 11.0);
    case 5: return edge(std::abs(std::hypot(x, y) - 15.0), 2.5);
    case 6: return std::max(edge(std::hypot(x - 12.0, y), 6.0), edge(std::hypot(x + 12.0, y), 6.0));
    default: throw UsageError("synthetic class index out of range");
  }
}

}  // namespace

GrayImage synth_image(std::size_t label, std::uint64_t seed) {
  Rng rng(seed);
  const double cx = 31.5 + rng.uniform(-3.0, 3.0);
  const double cy = 31.5 + rng.uniform(-3.0, 3.0);
  const double angle = rng.uniform(-0.12, 0.12);
  const double scale = rng.uniform(0.9, 1.1);
  const double background = rng.uniform(0.10, 0.25);
  const double ink = rng.uniform(0.65, 0.95);
  const double ca = std::cos(angle), sa = std::sin(angle);
  GrayImage image(kImageSize, kImageSize);
  for (std::size_t y = 0; y < kImageSize; ++y) {
    for (std::size_t x = 0; x < kImageSize; ++x) {
      const double dx = (static_cast<double>(x) - cx) / scale, dy = (static_cast<double>(y) - cy) / scale;
      const double lx = ca * dx + sa * dy, ly = -sa * dx + ca * dy;
      const double v = background + (ink - background) * glyph(label, lx, ly) + 0.04 * rng.normal();
      image.at(y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return image;
}

DatasetManifest synth_generate(std::size_t n_per_class, std::uint64_t seed, const std::string& out_dir) {
  if (n_per_class == 0) throw UsageError("synthetic corpus needs at least one image per class");
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "images", ec);
  if (ec) throw IoError("cannot create '" + (fs::path(out_dir) / "images").string() + "': " + ec.message());

  DatasetManifest manifest;
  manifest.base_dir = out_dir;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    for (std::size_t i = 0; i < n_per_class; ++i) {
      char name[64];
      std::snprintf(name, sizeof name, "images/%s_%03zu.pgm", std::string(kClassNames[c]).c_str(), i);
      const GrayImage image = synth_image(c, derive_seed(seed, c * 1000003 + i));
      save_pgm(image, (fs::path(out_dir) / name).string());
      manifest.records.push_back({name, c, Split::unassigned});
    }
  }
  write_manifest(manifest, (fs::path(out_dir) / "manifest.tsv").string());
  return manifest;
}

}  // namespace emotion
