#include "emotion/checkpoint.hpp"

#include <bit>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "emotion/errors.hpp"

namespace emotion {

namespace {

constexpr const char* kMagic = "EMOTION-CHECKPOINT 1";
constexpr int kOffsetDigits = 20;

std::string layer_line(const LayerSpec& layer) {
  std::ostringstream out;
  out << "layer " << layer_kind_name(layer.kind);
  switch (layer.kind) {
    case LayerKind::dense: out << ' ' << layer.units; break;
    case LayerKind::conv: out << ' ' << layer.filters << ' ' << layer.kernel_h << ' ' << layer.kernel_w; break;
    case LayerKind::maxpool: out << ' ' << layer.window << ' ' << layer.stride; break;
    case LayerKind::activation: out << ' ' << activation_name(layer.activation); break;
    default: break;
  }
  return out.str();
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

[[noreturn]] void corrupt(const std::string& why) { throw CheckpointError("corrupt checkpoint header: " + why); }

std::size_t parse_size(std::istringstream& in, const std::string& what) {
  std::string token;
  if (!(in >> token)) corrupt("missing " + what);
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(token, &pos);
  } catch (const std::exception&) {
    corrupt("bad " + what + " '" + token + "'");
  }
  if (pos != token.size() || token[0] == '-') corrupt("bad " + what + " '" + token + "'");
  return static_cast<std::size_t>(v);
}

LayerSpec parse_layer(std::istringstream& in) {
  std::string kind;
  if (!(in >> kind)) corrupt("layer line without kind");
  if (kind == "dense") return LayerSpec::dense(parse_size(in, "dense units"));
  if (kind == "conv") {
    const std::size_t f = parse_size(in, "conv filters");
    const std::size_t kh = parse_size(in, "conv kernel height");
    return LayerSpec::conv(f, kh, parse_size(in, "conv kernel width"));
  }
  if (kind == "maxpool") {
    const std::size_t w = parse_size(in, "pool window");
    return LayerSpec::maxpool(w, parse_size(in, "pool stride"));
  }
  if (kind == "activation") {
    std::string name;
    in >> name;
    try {
      return LayerSpec::act(parse_activation(name));
    } catch (const Error&) {
      corrupt("unknown activation '" + name + "'");
    }
  }
  if (kind == "flatten") return LayerSpec::flatten();
  if (kind == "softmax") return LayerSpec::softmax();
  corrupt("unknown layer kind '" + kind + "'");
}

struct DeclaredTensor {
  std::size_t layer;
  bool is_weight;
  Shape shape;
};

std::string tensor_label(const ModelSpec& spec, const DeclaredTensor& t) {
  return "layer " + std::to_string(t.layer) + " (" + spec.layers[t.layer].describe() + ") " +
         (t.is_weight ? "weight" : "bias");
}

}  // namespace

void append_f32_le(std::string& out, float value) {
  const auto bits = std::bit_cast<std::uint32_t>(value);
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFFu));
}

float read_f32_le(const char* bytes) {
  std::uint32_t bits = 0;
  for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[b])) << (8 * b);
  return std::bit_cast<float>(bits);
}

std::string LoadedCheckpoint::extra(const std::string& key, const std::string& fallback) const {
  for (const auto& [k, v] : extras) {
    if (k == key) return v;
  }
  return fallback;
}

std::string encode_checkpoint(const ModelState& model, const CheckpointExtras& extras) {
  std::ostringstream head;
  head << kMagic << '\n';
  head << "input_shape";
  for (auto d : model.spec.input_shape) head << ' ' << d;
  head << '\n';
  head << "seed " << model.spec.seed << '\n';
  head << "layers " << model.spec.layers.size() << '\n';
  for (const auto& layer : model.spec.layers) head << layer_line(layer) << '\n';
  head << "epochs " << model.meta.epochs << '\n';
  head << "loss_history " << model.meta.loss_history.size();
  for (double v : model.meta.loss_history) head << ' ' << format_double(v);
  head << '\n';
  for (const auto& [key, value] : extras) {
    if (key.empty() || key.find_first_of(" \t\n") != std::string::npos || value.find('\n') != std::string::npos) {
      throw UsageError("checkpoint extra '" + key + "' is not a single-line key/value pair");
    }
    head << "extra " << key << ' ' << value << '\n';
  }
  std::size_t payload_bytes = 0;
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    const LayerParams& p = model.params[i];
    if (p.weight.empty()) continue;
    for (const Tensor* t : {&p.weight, &p.bias}) {
      head << "tensor " << i << (t == &p.weight ? " weight" : " bias");
      for (auto d : t->shape()) head << ' ' << d;
      head << '\n';
      payload_bytes += t->size() * 4;
    }
  }
  std::string header = head.str();
  const std::size_t offset = header.size() + std::strlen("payload_offset ") + kOffsetDigits + 1 + std::strlen("end\n");
  char digits[kOffsetDigits + 1];
  std::snprintf(digits, sizeof digits, "%020zu", offset);
  header += "payload_offset ";
  header += digits;
  header += "\nend\n";

  std::string out = std::move(header);
  out.reserve(offset + payload_bytes);
  for (const LayerParams& p : model.params) {
    if (p.weight.empty()) continue;
    for (float v : p.weight.values()) append_f32_le(out, v);
    for (float v : p.bias.values()) append_f32_le(out, v);
  }
  return out;
}

LoadedCheckpoint decode_checkpoint(const std::string& bytes) {
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string {
    const std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string::npos) corrupt("header ends before 'end' line");
    std::string line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };

  if (bytes.empty()) corrupt("file is empty");
  if (next_line() != kMagic) corrupt("missing '" + std::string(kMagic) + "' magic line");

  ModelSpec spec;
  TrainingMeta meta;
  CheckpointExtras extras;
  std::vector<DeclaredTensor> declared;
  std::size_t declared_layers = 0;
  std::size_t offset = 0;
  bool have_offset = false;
  for (;;) {
    const std::string line = next_line();
    if (line == "end") break;
    std::istringstream in(line);
    std::string key;
    in >> key;
    if (key == "input_shape") {
      std::size_t d;
      while (in >> d) spec.input_shape.push_back(d);
    } else if (key == "seed") {
      std::string token;
      in >> token;
      try {
        spec.seed = std::stoull(token);
      } catch (const std::exception&) {
        corrupt("bad seed '" + token + "'");
      }
    } else if (key == "layers") {
      declared_layers = parse_size(in, "layer count");
    } else if (key == "layer") {
      spec.layers.push_back(parse_layer(in));
    } else if (key == "epochs") {
      meta.epochs = parse_size(in, "epoch count");
    } else if (key == "loss_history") {
      const std::size_t count = parse_size(in, "loss history length");
      for (std::size_t i = 0; i < count; ++i) {
        std::string token;
        if (!(in >> token)) corrupt("loss history shorter than declared");
        try {
          meta.loss_history.push_back(std::stod(token));
        } catch (const std::exception&) {
          corrupt("bad loss value '" + token + "'");
        }
      }
    } else if (key == "extra") {
      std::string k;
      in >> k;
      std::string value;
      std::getline(in >> std::ws, value);
      extras.emplace_back(k, value);
    } else if (key == "tensor") {
      DeclaredTensor t;
      t.layer = parse_size(in, "tensor layer");
      std::string which;
      in >> which;
      if (which != "weight" && which != "bias") corrupt("tensor kind must be weight or bias, got '" + which + "'");
      t.is_weight = which == "weight";
      std::size_t d;
      while (in >> d) t.shape.push_back(d);
      declared.push_back(std::move(t));
    } else if (key == "payload_offset") {
      offset = parse_size(in, "payload offset");
      have_offset = true;
    } else {
      corrupt("unknown header line '" + line + "'");
    }
  }
  if (!have_offset) corrupt("missing payload_offset");
  if (offset != pos) {
    corrupt("payload_offset " + std::to_string(offset) + " does not match header length " + std::to_string(pos));
  }
  if (declared_layers != spec.layers.size()) {
    corrupt("declares " + std::to_string(declared_layers) + " layers but lists " + std::to_string(spec.layers.size()));
  }

  LoadedCheckpoint result;
  try {
    result.model = build_model(spec);
  } catch (const BuildError& e) {
    throw CheckpointError(std::string("checkpoint model spec is invalid: ") + e.what());
  }
  ModelState& model = result.model;

  // Expected payload order derived from the spec alone.
  std::vector<DeclaredTensor> expected;
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    if (model.params[i].weight.empty()) continue;
    expected.push_back({i, true, model.params[i].weight.shape()});
    expected.push_back({i, false, model.params[i].bias.shape()});
  }
  if (declared.size() != expected.size()) {
    throw CheckpointError("checkpoint lists " + std::to_string(declared.size()) + " tensors but its spec implies " +
                          std::to_string(expected.size()));
  }
  for (std::size_t t = 0; t < expected.size(); ++t) {
    const DeclaredTensor& want = expected[t];
    const DeclaredTensor& got = declared[t];
    if (got.layer != want.layer || got.is_weight != want.is_weight || got.shape != want.shape) {
      throw CheckpointError("shape mismatch with declared spec at " + tensor_label(spec, want) + ": header declares " +
                            shape_to_string(got.shape) + ", spec implies " + shape_to_string(want.shape));
    }
  }

  const std::size_t available = bytes.size() - offset;
  std::size_t cursor = 0;
  for (const DeclaredTensor& t : expected) {
    const std::size_t need = shape_size(t.shape) * 4;
    if (cursor + need > available) {
      throw CheckpointError("truncated payload at " + tensor_label(spec, t) + ": needs bytes [" +
                            std::to_string(cursor) + ", " + std::to_string(cursor + need) + ") but payload holds " +
                            std::to_string(available));
    }
    Tensor& dst = t.is_weight ? model.params[t.layer].weight : model.params[t.layer].bias;
    const char* src = bytes.data() + offset + cursor;
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = read_f32_le(src + 4 * k);
    cursor += need;
  }
  if (cursor != available) {
    const std::string last = expected.empty() ? "header" : tensor_label(spec, expected.back());
    throw CheckpointError("payload has " + std::to_string(available - cursor) + " trailing bytes after " + last);
  }
  model.meta = std::move(meta);
  result.extras = std::move(extras);
  return result;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("failed reading '" + path + "'");
  return buf.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw IoError("failed writing '" + path + "'");
}

void save_checkpoint(const ModelState& model, const std::string& path, const CheckpointExtras& extras) {
  write_file(path, encode_checkpoint(model, extras));
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  const std::string bytes = read_file(path);
  try {
    return decode_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    throw CheckpointError("'" + path + "': " + e.what());
  }
}

}  // namespace emotion
