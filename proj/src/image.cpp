#include "emotion/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "emotion/checkpoint.hpp"
#include "emotion/errors.hpp"

namespace emotion {

GrayImage::GrayImage(std::size_t height, std::size_t width, float fill) : pixels_({height, width}, fill) {}

GrayImage::GrayImage(Tensor pixels) : pixels_(std::move(pixels)) {
  if (pixels_.rank() != 2) throw DimensionError("image tensor must be [h,w], got " + shape_to_string(pixels_.shape()));
}

namespace {

bool is_space(std::uint8_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

/// Reads one unsigned decimal header field, skipping whitespace and comments.
std::size_t pgm_field(std::span<const std::uint8_t> bytes, std::size_t& pos, const char* name) {
  for (;;) {
    while (pos < bytes.size() && is_space(bytes[pos])) ++pos;
    if (pos < bytes.size() && bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  if (pos >= bytes.size()) throw DecodeError(std::string("truncated stream: PGM header ends before ") + name);
  if (bytes[pos] < '0' || bytes[pos] > '9') throw DecodeError(std::string("malformed PGM header: bad ") + name);
  std::size_t value = 0;
  while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
    value = value * 10 + (bytes[pos] - '0');
    if (value > (1u << 30)) throw DecodeError(std::string("malformed PGM header: ") + name + " too large");
    ++pos;
  }
  return value;
}

GrayImage decode_pgm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 2;
  const std::size_t width = pgm_field(bytes, pos, "width");
  const std::size_t height = pgm_field(bytes, pos, "height");
  const std::size_t maxval = pgm_field(bytes, pos, "maxval");
  if (width == 0 || height == 0) throw DecodeError("malformed PGM header: zero image dimension");
  if (maxval > 255) throw DecodeError("non-8-bit depth: PGM maxval " + std::to_string(maxval));
  if (maxval != 255) throw DecodeError("unsupported format: PGM maxval " + std::to_string(maxval) + " (need 255)");
  if (pos >= bytes.size() || !is_space(bytes[pos])) throw DecodeError("truncated stream: PGM header not terminated");
  ++pos;
  const std::size_t need = width * height;
  if (bytes.size() - pos < need) {
    throw DecodeError("truncated stream: PGM needs " + std::to_string(need) + " pixel bytes, found " +
                      std::to_string(bytes.size() - pos));
  }
  GrayImage image(height, width);
  float* out = image.tensor().data();
  for (std::size_t i = 0; i < need; ++i) out[i] = static_cast<float>(bytes[pos + i]) / 255.0f;
  return image;
}

constexpr std::uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};

GrayImage decode_png(std::span<const std::uint8_t> bytes) {
  // IHDR is always the first chunk: 8 signature + 4 length + 4 type + 13 data.
  if (bytes.size() < 33 || std::memcmp(bytes.data() + 12, "IHDR", 4) != 0) {
    throw DecodeError("truncated stream: PNG ends before its IHDR chunk");
  }
  const std::uint8_t bit_depth = bytes[24];
  const std::uint8_t color_type = bytes[25];
  if (bit_depth != 8) throw DecodeError("non-8-bit depth: PNG bit depth " + std::to_string(bit_depth));
  if (color_type != 0) {
    throw DecodeError("unsupported format: PNG color type " + std::to_string(color_type) + " is not grayscale");
  }
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    throw DecodeError(std::string("malformed PNG: ") + img.message);
  }
  img.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> raw(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, raw.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw DecodeError("truncated stream: PNG pixel data unreadable (" + msg + ")");
  }
  GrayImage image(img.height, img.width);
  float* out = image.tensor().data();
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = static_cast<float>(raw[i]) / 255.0f;
  return image;
}

std::uint8_t quantize(float v) {
  const float clamped = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(clamped * 255.0f));
}

}  // namespace

GrayImage decode_image(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw DecodeError("empty byte stream");
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return decode_pgm(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] >= '1' && bytes[1] <= '7') {
    throw DecodeError(std::string("unsupported format: netpbm variant P") + static_cast<char>(bytes[1]) +
                      " (only binary P5 is supported)");
  }
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSignature, 8) == 0) return decode_png(bytes);
  throw DecodeError("unsupported format: stream is neither binary PGM nor PNG");
}

GrayImage decode_image(const std::string& bytes) {
  return decode_image(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

GrayImage load_image(const std::string& path) {
  const std::string bytes = read_file(path);
  try {
    return decode_image(bytes);
  } catch (const DecodeError& e) {
    throw DecodeError("'" + path + "': " + e.what());
  }
}

std::string encode_pgm(const GrayImage& image) {
  std::string out = "P5\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
  out.reserve(out.size() + image.tensor().size());
  for (float v : image.tensor().values()) out.push_back(static_cast<char>(quantize(v)));
  return out;
}

std::string encode_png(const GrayImage& image) {
  std::vector<std::uint8_t> raw;
  raw.reserve(image.tensor().size());
  for (float v : image.tensor().values()) raw.push_back(quantize(v));
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width());
  img.height = static_cast<png_uint_32>(image.height());
  img.format = PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, raw.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encoding failed: ") + img.message);
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, raw.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encoding failed: ") + img.message);
  }
  out.resize(size);
  return out;
}

void save_pgm(const GrayImage& image, const std::string& path) { write_file(path, encode_pgm(image)); }

GrayImage resize_bilinear(const GrayImage& image, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0) {
    throw DimensionError("resize target must be at least 1x1, got " + std::to_string(out_h) + "x" +
                         std::to_string(out_w));
  }
  const std::size_t in_h = image.height(), in_w = image.width();
  auto source = [](std::size_t i, std::size_t in, std::size_t out) {
    return out == 1 ? 0.0 : static_cast<double>(i) * static_cast<double>(in - 1) / static_cast<double>(out - 1);
  };
  GrayImage result(out_h, out_w);
  for (std::size_t y = 0; y < out_h; ++y) {
    const double sy = source(y, in_h, out_h);
    const std::size_t y0 = std::min(static_cast<std::size_t>(sy), in_h - 1);
    const std::size_t y1 = std::min(y0 + 1, in_h - 1);
    const double fy = sy - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_w; ++x) {
      const double sx = source(x, in_w, out_w);
      const std::size_t x0 = std::min(static_cast<std::size_t>(sx), in_w - 1);
      const std::size_t x1 = std::min(x0 + 1, in_w - 1);
      const double fx = sx - static_cast<double>(x0);
      const double top = (1.0 - fx) * image.at(y0, x0) + fx * image.at(y0, x1);
      const double bottom = (1.0 - fx) * image.at(y1, x0) + fx * image.at(y1, x1);
      result.at(y, x) = static_cast<float>((1.0 - fy) * top + fy * bottom);
    }
  }
  return result;
}

GrayImage crop(const GrayImage& image, std::size_t top, std::size_t left, std::size_t height, std::size_t width) {
  if (height == 0 || width == 0 || top + height > image.height() || left + width > image.width()) {
    throw DimensionError("crop " + std::to_string(height) + "x" + std::to_string(width) + " at (" +
                         std::to_string(top) + "," + std::to_string(left) + ") exceeds image " +
                         std::to_string(image.height()) + "x" + std::to_string(image.width()));
  }
  GrayImage out(height, width);
  for (std::size_t y = 0; y < height; ++y) {
    std::memcpy(out.tensor().data() + y * width, image.tensor().data() + (top + y) * image.width() + left,
                width * sizeof(float));
  }
  return out;
}

std::vector<GrayImage> extract_patches(const GrayImage& image) {
  if (image.height() != kImageSize || image.width() != kImageSize) {
    throw DimensionError("patch extraction needs a 64x64 image, got " + std::to_string(image.height()) + "x" +
                         std::to_string(image.width()));
  }
  std::vector<GrayImage> patches;
  patches.reserve(kPatchesPerImage);
  for (std::size_t top : kPatchOffsets) {
    for (std::size_t left : kPatchOffsets) patches.push_back(crop(image, top, left, kPatchSize, kPatchSize));
  }
  return patches;
}

}  // namespace emotion
