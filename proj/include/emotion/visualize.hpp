#pragma once

#include <vector>

#include "emotion/cnn.hpp"
#include "emotion/image.hpp"

namespace emotion {

/// Network input for an arbitrary image: 48x48 images pass through; others
/// are resized to 64x64 and the centered 48x48 crop is taken.
Tensor cnn_input_from_image(const GrayImage& image, std::size_t input_size = kPatchSize);

/// Raw filter responses (pre-activation) of the conv layer at 1-based
/// structural position `layer_index`, one map per filter. Each map is
/// min-max normalized to [0,1], multiplied by brightness_scale and clamped;
/// a constant map becomes all zeros.
std::vector<GrayImage> visualize_filter_maps(const CnnModel& model, const GrayImage& image, std::size_t layer_index,
                                             float brightness_scale);

/// Structural positions that address conv layers (1, 3, 5 for the default
/// layout).
std::vector<std::size_t> conv_layer_positions(const CnnModel& model);

}  // namespace emotion
