#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mgc {

/// Raised on any dimension or shape disagreement between operands.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a NaN or Inf shows up where finite values are required.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DType : std::uint8_t { f32 = 0, f64 = 1, i32 = 2 };

template <typename T>
constexpr DType dtype_of();
template <>
constexpr DType dtype_of<float>() { return DType::f32; }
template <>
constexpr DType dtype_of<double>() { return DType::f64; }
template <>
constexpr DType dtype_of<std::int32_t>() { return DType::i32; }

const char* dtype_name(DType d);

/// (batch, channel, height, width). Every tensor in the library is rank 4.
struct Shape {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t numel() const noexcept { return n * c * h * w; }
  std::size_t plane() const noexcept { return h * w; }
  friend bool operator==(const Shape&, const Shape&) = default;
  std::string str() const;
};

enum class Mode { train, eval };

/// Dense rank-4 tensor with shared storage and an optional gradient buffer.
///
/// Copies are cheap handles onto the same storage; use clone() for a deep
/// copy. Data is laid out row-major in (n, c, h, w) order, so tokens of a
/// feature map are flattened row by row.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0))
      : s_(std::make_shared<Storage>(Storage{shape, std::vector<T>(shape.numel(), fill), {}, false})) {}
  Tensor(Shape shape, std::vector<T> values) {
    if (values.size() != shape.numel()) {
      throw ShapeError("tensor data length " + std::to_string(values.size()) + " does not match shape " +
                       shape.str());
    }
    s_ = std::make_shared<Storage>(Storage{shape, std::move(values), {}, false});
  }

  bool defined() const noexcept { return s_ != nullptr; }
  bool same(const Tensor& other) const noexcept { return s_ == other.s_; }

  const Shape& shape() const { return s_->shape; }
  std::size_t numel() const { return s_->shape.numel(); }

  std::span<T> data() { return s_->data; }
  std::span<const T> data() const { return s_->data; }

  std::size_t index(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    const Shape& s = s_->shape;
    return ((n * s.c + c) * s.h + h) * s.w + w;
  }
  T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) { return s_->data[index(n, c, h, w)]; }
  T at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const { return s_->data[index(n, c, h, w)]; }

  T item() const {
    if (numel() != 1) {
      throw ShapeError("item() on tensor of shape " + shape().str());
    }
    return s_->data[0];
  }

  bool requires_grad() const noexcept { return s_ && s_->requires_grad; }
  Tensor& set_requires_grad(bool value) {
    s_->requires_grad = value;
    return *this;
  }

  bool has_grad() const noexcept { return s_ && !s_->grad.empty(); }
  // Gradient storage is shared by every handle, so these are const.
  std::span<T> grad() const { return s_->grad; }
  std::span<T> ensure_grad() const {
    if (s_->grad.empty()) {
      s_->grad.assign(numel(), T(0));
    }
    return s_->grad;
  }
  void zero_grad() const {
    if (!s_->grad.empty()) {
      std::fill(s_->grad.begin(), s_->grad.end(), T(0));
    }
  }
  void drop_grad() { s_->grad.clear(); }

  /// Deep copy of shape and data; the copy has no gradient and does not
  /// require one.
  Tensor clone() const { return Tensor(shape(), s_->data); }

 private:
  struct Storage {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> s_;
};

/// Throws NonFiniteError naming `what` if any entry is NaN or Inf.
template <typename T>
void check_finite(const Tensor<T>& x, const std::string& what);

template <typename T>
bool all_finite(std::span<const T> values);

/// Largest absolute elementwise difference; shapes must agree.
template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b);

/// Converts between precisions (values rounded on narrowing).
template <typename To, typename From>
Tensor<To> cast(const Tensor<From>& x) {
  std::vector<To> out(x.numel());
  auto src = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<To>(src[i]);
  }
  return Tensor<To>(x.shape(), std::move(out));
}

}  // namespace mgc
