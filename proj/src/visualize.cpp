#include "emotion/visualize.hpp"

#include <algorithm>
#include <cmath>

#include "emotion/errors.hpp"

namespace emotion {

Tensor cnn_input_from_image(const GrayImage& image, std::size_t input_size) {
  if (image.height() == input_size && image.width() == input_size) {
    return image.tensor().reshaped({1, input_size, input_size});
  }
  const GrayImage full = (image.height() == kImageSize && image.width() == kImageSize)
                             ? image
                             : resize_bilinear(image, kImageSize, kImageSize);
  const std::size_t margin = (kImageSize - input_size) / 2;
  return crop(full, margin, margin, input_size, input_size).tensor().reshaped({1, input_size, input_size});
}

std::vector<std::size_t> conv_layer_positions(const CnnModel& model) {
  std::vector<std::size_t> out;
  const auto layers = structural_layers(model.state.spec);
  for (std::size_t pos = 0; pos < layers.size(); ++pos) {
    if (model.state.spec.layers[layers[pos]].kind == LayerKind::conv) out.push_back(pos + 1);
  }
  return out;
}

std::vector<GrayImage> visualize_filter_maps(const CnnModel& model, const GrayImage& image, std::size_t layer_index,
                                             float brightness_scale) {
  if (!(brightness_scale > 0.0f) || !std::isfinite(brightness_scale)) {
    throw UsageError("brightness scale must be positive");
  }
  const auto layers = structural_layers(model.state.spec);
  const auto valid = conv_layer_positions(model);
  if (std::find(valid.begin(), valid.end(), layer_index) == valid.end()) {
    std::string list;
    for (auto v : valid) list += (list.empty() ? "" : ", ") + std::to_string(v);
    throw UsageError("layer " + std::to_string(layer_index) + " is not a conv layer; valid conv layers: " + list);
  }
  const std::size_t spec_index = layers[layer_index - 1];
  const Tensor maps = forward_prefix(model.state, cnn_input_from_image(image, model.config.input_size), spec_index + 1);
  const std::size_t filters = maps.dim(0), h = maps.dim(1), w = maps.dim(2);
  std::vector<GrayImage> out;
  for (std::size_t f = 0; f < filters; ++f) {
    const float* plane = maps.data() + f * h * w;
    const auto [lo, hi] = std::minmax_element(plane, plane + h * w);
    const float range = *hi - *lo;
    GrayImage img(h, w);
    if (range > 0.0f) {
      for (std::size_t i = 0; i < h * w; ++i) {
        const float v = (plane[i] - *lo) / range * brightness_scale;
        img.tensor()[i] = std::clamp(v, 0.0f, 1.0f);
      }
    }
    out.push_back(std::move(img));
  }
  return out;
}

}  // namespace emotion
