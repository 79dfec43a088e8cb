#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace emotion {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense row-major float32 array. The shape is fixed at construction; only
/// the element values may change afterwards.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> data);

  static Tensor from(std::initializer_list<float> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }
  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  float& at(std::size_t i, std::size_t j);
  float at(std::size_t i, std::size_t j) const;
  float& at(std::size_t i, std::size_t j, std::size_t k);
  float at(std::size_t i, std::size_t j, std::size_t k) const;

  /// Same data under a different shape of equal element count.
  Tensor reshaped(Shape shape) const;

  /// Copy of the `index`-th slice along the leading axis.
  Tensor slice(std::size_t index) const;

  void fill(float value);

  bool all_finite() const;

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  Shape shape_;
  std::vector<float> data_;
};

enum class Activation { relu, sigmoid, tanh };

const char* activation_name(Activation kind);
Activation parse_activation(const std::string& name);

/// a[m,k] x b[k,n].
Tensor matmul(const Tensor& a, const Tensor& b);
/// a[m,k] x b[n,k]^T -> [m,n].
Tensor matmul_bt(const Tensor& a, const Tensor& b);
/// a[k,m]^T x b[k,n] -> [m,n].
Tensor matmul_at(const Tensor& a, const Tensor& b);

/// In-place forms; `out` must already have the result shape and is
/// overwritten.
void matmul_into(const Tensor& a, const Tensor& b, Tensor& out);
void matmul_bt_into(const Tensor& a, const Tensor& b, Tensor& out);
void matmul_at_into(const Tensor& a, const Tensor& b, Tensor& out);

/// Cross-correlation over all valid positions. input [c,h,w], filters
/// [f,c,fh,fw], bias [f] -> [f, h-fh+1, w-fw+1].
Tensor conv2d_valid(const Tensor& input, const Tensor& filters, const Tensor& bias);

struct PoolResult {
  Tensor output;
  /// Flat index into the input of the element selected for each output.
  std::vector<std::size_t> argmax;
};

/// Max pooling over [c,h,w]. Ties resolve to the first element in row-major
/// window order.
PoolResult maxpool2(const Tensor& input, std::size_t window, std::size_t stride);

Tensor activate(const Tensor& input, Activation kind);

/// Numerically stable softmax of a rank-1 tensor.
Tensor softmax(const Tensor& input);

namespace kernels {

/// Dot product with a fixed accumulation order (8 interleaved lanes).
float dot(const float* a, const float* b, std::size_t n);
/// y += alpha * x
void axpy(float alpha, const float* x, float* y, std::size_t n);

}  // namespace kernels

}  // namespace emotion
