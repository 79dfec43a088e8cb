#pragma once

#include <cstdint>
#include <string>

#include "emotion/dataset.hpp"
#include "emotion/image.hpp"

namespace emotion {

/// Procedural 64x64 stand-in for a posed-expression corpus. Each class has
/// its own glyph (horizontal bar, vertical bar, two diagonals, disk, ring,
/// pair of dots); samples jitter position, angle, scale, contrast and noise.
GrayImage synth_image(std::size_t label, std::uint64_t seed);

/// Writes `n_per_class` PGM files per class under out_dir/images and the
/// manifest at out_dir/manifest.tsv (records unassigned, class-major order).
DatasetManifest synth_generate(std::size_t n_per_class, std::uint64_t seed, const std::string& out_dir);

}  // namespace emotion
