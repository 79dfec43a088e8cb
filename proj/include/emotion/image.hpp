#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "emotion/tensor.hpp"

namespace emotion {

/// Grayscale image with pixels in [0, 1], stored as a [height, width] tensor.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(std::size_t height, std::size_t width, float fill = 0.0f);
  /// Takes a rank-2 tensor; throws DimensionError otherwise.
  explicit GrayImage(Tensor pixels);

  std::size_t height() const { return pixels_.dim(0); }
  std::size_t width() const { return pixels_.dim(1); }
  float& at(std::size_t y, std::size_t x) { return pixels_.at(y, x); }
  float at(std::size_t y, std::size_t x) const { return pixels_.at(y, x); }

  const Tensor& tensor() const { return pixels_; }
  Tensor& tensor() { return pixels_; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  Tensor pixels_;
};

/// Decodes binary PGM (P5, maxval 255) or 8-bit grayscale PNG. Pixel p maps
/// to p / 255.
GrayImage decode_image(std::span<const std::uint8_t> bytes);
GrayImage decode_image(const std::string& bytes);
/// Reads and decodes a file; errors name the path.
GrayImage load_image(const std::string& path);

/// Values are clamped to [0,1] and rounded to the nearest 8-bit level.
std::string encode_pgm(const GrayImage& image);
std::string encode_png(const GrayImage& image);
void save_pgm(const GrayImage& image, const std::string& path);

/// Bilinear resampling with corner-aligned sample positions: output pixel y
/// samples source row y * (in_h - 1) / (out_h - 1).
GrayImage resize_bilinear(const GrayImage& image, std::size_t out_h, std::size_t out_w);

inline constexpr std::size_t kImageSize = 64;
inline constexpr std::size_t kPatchSize = 48;
inline constexpr std::size_t kPatchesPerImage = 16;
/// Crop origins along each axis; the patch grid is their cartesian product.
inline constexpr std::array<std::size_t, 4> kPatchOffsets = {0, 5, 11, 16};

/// All 16 48x48 crops of a 64x64 image, row-major over (row offset, column
/// offset).
std::vector<GrayImage> extract_patches(const GrayImage& image);

GrayImage crop(const GrayImage& image, std::size_t top, std::size_t left, std::size_t height, std::size_t width);

}  // namespace emotion
