#pragma once

#include <string>
#include <utility>
#include <vector>

#include "emotion/layers.hpp"

namespace emotion {

/// Free-form key/value lines stored alongside a model. Keys must not contain
/// whitespace and values must not contain newlines.
using CheckpointExtras = std::vector<std::pair<std::string, std::string>>;

struct LoadedCheckpoint {
  ModelState model;
  CheckpointExtras extras;

  /// Value for `key`, or `fallback` when absent.
  std::string extra(const std::string& key, const std::string& fallback = {}) const;
};

/// Checkpoint layout:
///
///   EMOTION-CHECKPOINT 1
///   input_shape <d0> <d1> ...
///   seed <u64>
///   layers <count>
///   layer <kind> <kind parameters>        one line per layer, in order
///   epochs <n>
///   loss_history <count> <v0> <v1> ...    %.17g
///   extra <key> <value>                   zero or more
///   tensor <layer> weight|bias <dims...>  parameter tensors in payload order
///   payload_offset <20-digit byte offset>
///   end
///
/// followed by every listed tensor as little-endian IEEE-754 float32,
/// row-major, layer by layer with each weight before its bias. The offset
/// counts bytes from the start of the file to the first payload byte.
std::string encode_checkpoint(const ModelState& model, const CheckpointExtras& extras = {});
LoadedCheckpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const ModelState& model, const std::string& path, const CheckpointExtras& extras = {});
LoadedCheckpoint load_checkpoint(const std::string& path);

/// Whole-file helpers shared by the on-disk formats.
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

/// Little-endian float32 packing.
void append_f32_le(std::string& out, float value);
float read_f32_le(const char* bytes);

}  // namespace emotion
