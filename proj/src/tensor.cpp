#include "emotion/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "emotion/errors.hpp"
#include "emotion/parallel.hpp"

namespace emotion {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace {

void check_dims(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one dimension");
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimension of zero in shape " + shape_to_string(shape));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, float fill) : shape_(std::move(shape)) {
  check_dims(shape_);
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_dims(shape_);
  if (shape_size(shape_) != data_.size()) {
    throw DimensionError("shape " + shape_to_string(shape_) + " holds " + std::to_string(shape_size(shape_)) +
                         " values but " + std::to_string(data_.size()) + " were given");
  }
}

Tensor Tensor::from(std::initializer_list<float> values) {
  return Tensor({values.size()}, std::vector<float>(values));
}

float& Tensor::at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
float Tensor::at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
float& Tensor::at(std::size_t i, std::size_t j, std::size_t k) { return data_[(i * shape_[1] + j) * shape_[2] + k]; }
float Tensor::at(std::size_t i, std::size_t j, std::size_t k) const {
  return data_[(i * shape_[1] + j) * shape_[2] + k];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw DimensionError("cannot reshape " + shape_to_string(shape_) + " to " + shape_to_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

Tensor Tensor::slice(std::size_t index) const {
  if (rank() < 2 || index >= shape_[0]) {
    throw DimensionError("slice " + std::to_string(index) + " out of range for " + shape_to_string(shape_));
  }
  Shape inner(shape_.begin() + 1, shape_.end());
  std::size_t n = shape_size(inner);
  return Tensor(std::move(inner), std::vector<float>(data_.begin() + index * n, data_.begin() + (index + 1) * n));
}

void Tensor::fill(float value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

const char* activation_name(Activation kind) {
  switch (kind) {
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "tanh") return Activation::tanh;
  throw Error("unknown activation '" + name + "'");
}

namespace kernels {

float dot(const float* a, const float* b, std::size_t n) {
  float lanes[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (std::size_t l = 0; l < 8; ++l) lanes[l] += a[i + l] * b[i + l];
  }
  for (std::size_t l = 0; i < n; ++i, ++l) lanes[l] += a[i] * b[i];
  return ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) + ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]));
}

void axpy(float alpha, const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace kernels

namespace {

void require_matrix(const Tensor& t, const char* name) {
  if (t.rank() != 2) {
    throw DimensionError(std::string("matmul operand ") + name + " must be rank 2, got " + shape_to_string(t.shape()));
  }
}

[[noreturn]] void inner_mismatch(const Tensor& a, const Tensor& b, const char* op) {
  throw DimensionError(std::string(op) + ": inner dimensions disagree between " + shape_to_string(a.shape()) +
                       " and " + shape_to_string(b.shape()));
}

}  // namespace

namespace {

void require_out(const Tensor& out, std::size_t m, std::size_t n, const char* op) {
  if (out.shape() != Shape{m, n}) {
    throw DimensionError(std::string(op) + ": output must be [" + std::to_string(m) + "," + std::to_string(n) +
                         "], got " + shape_to_string(out.shape()));
  }
}

}  // namespace

void matmul_into(const Tensor& a, const Tensor& b, Tensor& out) {
  require_matrix(a, "a");
  require_matrix(b, "b");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) inner_mismatch(a, b, "matmul");
  require_out(out, m, n, "matmul");
  // Column blocks keep the touched slice of `out` cache resident while each
  // row of b streams through once.
  constexpr std::size_t block = 256;
  parallel_for((n + block - 1) / block, [&](std::size_t jb) {
    const std::size_t j0 = jb * block, width = std::min(block, n - j0);
    for (std::size_t i = 0; i < m; ++i) std::fill_n(out.data() + i * n + j0, width, 0.0f);
    for (std::size_t p = 0; p < k; ++p) {
      const float* brow = b.data() + p * n + j0;
      for (std::size_t i = 0; i < m; ++i) kernels::axpy(a.data()[i * k + p], brow, out.data() + i * n + j0, width);
    }
  });
}

void matmul_bt_into(const Tensor& a, const Tensor& b, Tensor& out) {
  require_matrix(a, "a");
  require_matrix(b, "b");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  if (b.dim(1) != k) inner_mismatch(a, b, "matmul_bt");
  require_out(out, m, n, "matmul_bt");
  // Column-outer so each row of b stays cache resident across all rows of a.
  parallel_for(n, [&](std::size_t j) {
    const float* brow = b.data() + j * k;
    for (std::size_t i = 0; i < m; ++i) out.data()[i * n + j] = kernels::dot(a.data() + i * k, brow, k);
  });
}

void matmul_at_into(const Tensor& a, const Tensor& b, Tensor& out) {
  require_matrix(a, "a");
  require_matrix(b, "b");
  const std::size_t k = a.dim(0), m = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) inner_mismatch(a, b, "matmul_at");
  require_out(out, m, n, "matmul_at");
  parallel_for(m, [&](std::size_t i) {
    float* row = out.data() + i * n;
    const float a0 = a.data()[i];
    for (std::size_t j = 0; j < n; ++j) row[j] = a0 * b.data()[j];
    for (std::size_t p = 1; p < k; ++p) kernels::axpy(a.data()[p * m + i], b.data() + p * n, row, n);
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "a");
  require_matrix(b, "b");
  Tensor out({a.dim(0), b.dim(1)});
  matmul_into(a, b, out);
  return out;
}

Tensor matmul_bt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "a");
  require_matrix(b, "b");
  Tensor out({a.dim(0), b.dim(0)});
  matmul_bt_into(a, b, out);
  return out;
}

Tensor matmul_at(const Tensor& a, const Tensor& b) {
  require_matrix(a, "a");
  require_matrix(b, "b");
  Tensor out({a.dim(1), b.dim(1)});
  matmul_at_into(a, b, out);
  return out;
}

Tensor conv2d_valid(const Tensor& input, const Tensor& filters, const Tensor& bias) {
  if (input.rank() != 3) throw DimensionError("conv2d input must be [c,h,w], got " + shape_to_string(input.shape()));
  if (filters.rank() != 4) {
    throw DimensionError("conv2d filters must be [f,c,fh,fw], got " + shape_to_string(filters.shape()));
  }
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t f = filters.dim(0), fh = filters.dim(2), fw = filters.dim(3);
  if (filters.dim(1) != c) {
    throw DimensionError("conv2d channel mismatch: input " + shape_to_string(input.shape()) + ", filters " +
                         shape_to_string(filters.shape()));
  }
  if (fh > h || fw > w) {
    throw DimensionError("conv2d kernel " + shape_to_string(filters.shape()) + " larger than input " +
                         shape_to_string(input.shape()));
  }
  if (bias.rank() != 1 || bias.dim(0) != f) {
    throw DimensionError("conv2d bias must be [" + std::to_string(f) + "], got " + shape_to_string(bias.shape()));
  }
  const std::size_t oh = h - fh + 1, ow = w - fw + 1;
  Tensor out({f, oh, ow});
  parallel_for(f, [&](std::size_t fi) {
    float* plane = out.data() + fi * oh * ow;
    std::fill(plane, plane + oh * ow, bias[fi]);
    for (std::size_t ci = 0; ci < c; ++ci) {
      const float* in = input.data() + ci * h * w;
      const float* kernel = filters.data() + (fi * c + ci) * fh * fw;
      for (std::size_t ky = 0; ky < fh; ++ky) {
        for (std::size_t kx = 0; kx < fw; ++kx) {
          const float weight = kernel[ky * fw + kx];
          for (std::size_t y = 0; y < oh; ++y) {
            kernels::axpy(weight, in + (y + ky) * w + kx, plane + y * ow, ow);
          }
        }
      }
    }
  });
  return out;
}

PoolResult maxpool2(const Tensor& input, std::size_t window, std::size_t stride) {
  if (input.rank() != 3) throw DimensionError("maxpool input must be [c,h,w], got " + shape_to_string(input.shape()));
  if (window == 0 || stride == 0) throw DimensionError("maxpool window and stride must be positive");
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (window > h || window > w || (h - window) % stride != 0 || (w - window) % stride != 0) {
    throw DimensionError("maxpool window " + std::to_string(window) + "/stride " + std::to_string(stride) +
                         " does not tile input " + shape_to_string(input.shape()));
  }
  const std::size_t oh = (h - window) / stride + 1, ow = (w - window) / stride + 1;
  PoolResult result{Tensor({c, oh, ow}), std::vector<std::size_t>(c * oh * ow)};
  const float* in = input.data();
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        std::size_t best = (ci * h + y * stride) * w + x * stride;
        for (std::size_t dy = 0; dy < window; ++dy) {
          for (std::size_t dx = 0; dx < window; ++dx) {
            std::size_t idx = (ci * h + y * stride + dy) * w + x * stride + dx;
            if (in[idx] > in[best]) best = idx;
          }
        }
        std::size_t o = (ci * oh + y) * ow + x;
        result.output[o] = in[best];
        result.argmax[o] = best;
      }
    }
  }
  return result;
}

Tensor activate(const Tensor& input, Activation kind) {
  Tensor out = input;
  for (float& v : out.values()) {
    switch (kind) {
      case Activation::relu: v = v > 0.0f ? v : 0.0f; break;
      case Activation::sigmoid: v = 1.0f / (1.0f + std::exp(-v)); break;
      case Activation::tanh: v = std::tanh(v); break;
    }
  }
  return out;
}

Tensor softmax(const Tensor& input) {
  if (input.rank() != 1) throw DimensionError("softmax expects a rank-1 tensor, got " + shape_to_string(input.shape()));
  if (!input.all_finite()) throw NumericError("softmax input contains non-finite values");
  Tensor out = input;
  const float peak = *std::max_element(out.values().begin(), out.values().end());
  double total = 0.0;
  for (float& v : out.values()) {
    v = std::exp(v - peak);
    total += v;
  }
  for (float& v : out.values()) v = static_cast<float>(v / total);
  return out;
}

}  // namespace emotion
