#pragma once

#include <span>

#include "mgc/tape.hpp"
#include "mgc/tensor.hpp"

// Differentiable forward operations. Every op takes the tape it records on;
// pass a non-recording tape (Tape<T>{false}) for inference.

namespace mgc {

/// Dense 2-D convolution. `weight` is (out_c, in_c, kh, kw); `bias`, when
/// defined, is (1, out_c, 1, 1). Padding is zero-padding on all sides.
template <typename T>
Tensor<T> conv2d(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t stride, std::size_t padding);

/// Per-channel convolution; `weight` is (c, 1, kh, kw).
template <typename T>
Tensor<T> depthwise_conv2d(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& weight, std::size_t stride,
                           std::size_t padding);
/// Depthwise with a per-channel bias (1, c, 1, 1).
template <typename T>
Tensor<T> depthwise_conv2d(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                           std::size_t stride, std::size_t padding);

/// Tanh-approximated GELU:
///   gelu(x) = 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))
template <typename T>
Tensor<T> gelu(Tape<T>& tape, const Tensor<T>& x);

/// Scalar GELU with the same constants as the tensor op.
template <typename T>
T gelu_scalar(T x);

/// Per-channel affine parameters and running statistics, each (1, c, 1, 1).
template <typename T>
struct BatchNormState {
  Tensor<T> gamma;
  Tensor<T> beta;
  Tensor<T> running_mean;
  Tensor<T> running_var;

  static BatchNormState make(std::size_t channels);
  std::size_t channels() const { return gamma.shape().c; }
};

inline constexpr double kBatchNormMomentum = 0.1;
inline constexpr double kBatchNormEps = 1e-5;

/// Train mode normalizes by batch statistics (biased variance) and updates
/// the running statistics in place (unbiased variance); eval mode uses the
/// running statistics.
template <typename T>
Tensor<T> batchnorm2d(Tape<T>& tape, const Tensor<T>& x, BatchNormState<T>& bn, Mode mode,
                      double momentum = kBatchNormMomentum, double eps = kBatchNormEps);

/// out[n,c,i,j] = x[n,c,(i-dy) mod h,(j-dx) mod w].
template <typename T>
Tensor<T> circular_shift(Tape<T>& tape, const Tensor<T>& x, long dy, long dx);

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> sub(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

/// Elementwise max. Ties go to `a`, and so does the whole gradient.
template <typename T>
Tensor<T> maximum(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul_scalar(Tape<T>& tape, const Tensor<T>& a, T s);

template <typename T>
Tensor<T> concat_channels(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

/// (n, c, h, w) -> (n, c, 1, 1).
template <typename T>
Tensor<T> global_avg_pool(Tape<T>& tape, const Tensor<T>& x);

/// Flattens each sample of x to a row and applies y = W row + b.
/// `weight` is (out, in, 1, 1), `bias` (1, out, 1, 1) or undefined; the
/// result is (n, out, 1, 1).
template <typename T>
Tensor<T> linear(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

/// Sum of all entries as a (1, 1, 1, 1) tensor.
template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& x);

/// Mean negative log-likelihood of `labels` under softmax(logits).
/// logits is (n, k, 1, 1); every label must be in [0, k).
template <typename T>
Tensor<T> softmax_cross_entropy(Tape<T>& tape, const Tensor<T>& logits, std::span<const int> labels);

}  // namespace mgc
