#include "mgc/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace mgc {

template <typename T>
Tensor<T> init_conv_weight(Rng& rng, Shape shape) {
  const double fan_in = static_cast<double>(shape.c * shape.h * shape.w);
  const double sd = 1.0 / std::sqrt(fan_in);
  Tensor<T> t(shape);
  for (T& v : t.data()) v = static_cast<T>(rng.truncated_normal(sd));
  t.set_requires_grad(true);
  return t;
}

namespace {

template <typename T>
BatchNormState<T> trainable_bn(std::size_t channels) {
  auto bn = BatchNormState<T>::make(channels);
  bn.gamma.set_requires_grad(true);
  bn.beta.set_requires_grad(true);
  return bn;
}

}  // namespace

template <typename T>
ConvBn<T> ConvBn<T>::make(Rng& rng, std::size_t in_c, std::size_t out_c, std::size_t kernel, std::size_t stride,
                          std::size_t padding) {
  ConvBn cb;
  cb.weight = init_conv_weight<T>(rng, Shape{out_c, in_c, kernel, kernel});
  cb.bn = trainable_bn<T>(out_c);
  cb.stride = stride;
  cb.padding = padding;
  return cb;
}

template <typename T>
ConvBn<T> ConvBn<T>::make_depthwise(Rng& rng, std::size_t channels, std::size_t kernel, std::size_t stride,
                                    std::size_t padding) {
  ConvBn cb;
  cb.weight = init_conv_weight<T>(rng, Shape{channels, 1, kernel, kernel});
  cb.bn = trainable_bn<T>(channels);
  cb.stride = stride;
  cb.padding = padding;
  cb.depthwise = true;
  return cb;
}

template <typename T>
Tensor<T> ConvBn<T>::forward(Tape<T>& tape, const Tensor<T>& x, Mode mode) {
  if (folded) {
    return depthwise ? depthwise_conv2d(tape, x, weight, bias, stride, padding)
                     : conv2d(tape, x, weight, bias, stride, padding);
  }
  Tensor<T> y = depthwise ? depthwise_conv2d(tape, x, weight, stride, padding)
                          : conv2d(tape, x, weight, Tensor<T>{}, stride, padding);
  return batchnorm2d(tape, y, bn, mode);
}

template <typename T>
void ConvBn<T>::visit(const std::string& prefix, const TensorVisitor<T>& f) {
  f(prefix + ".weight", weight, TensorKind::parameter);
  if (folded) {
    f(prefix + ".bias", bias, TensorKind::parameter);
    return;
  }
  f(prefix + ".bn.gamma", bn.gamma, TensorKind::parameter);
  f(prefix + ".bn.beta", bn.beta, TensorKind::parameter);
  f(prefix + ".bn.running_mean", bn.running_mean, TensorKind::buffer);
  f(prefix + ".bn.running_var", bn.running_var, TensorKind::buffer);
}

template <typename T>
void ConvBn<T>::fold() {
  if (folded) {
    throw std::logic_error("ConvBn::fold: already folded");
  }
  const Shape ks = weight.shape();
  const std::size_t per_out = ks.c * ks.h * ks.w;
  Tensor<T> w = weight.clone();
  Tensor<T> b(Shape{1, ks.n, 1, 1});
  auto wd = w.data();
  auto bd = b.data();
  for (std::size_t o = 0; o < ks.n; ++o) {
    const double scale = static_cast<double>(bn.gamma.data()[o]) /
                         std::sqrt(static_cast<double>(bn.running_var.data()[o]) + kBatchNormEps);
    for (std::size_t i = 0; i < per_out; ++i) wd[o * per_out + i] = static_cast<T>(wd[o * per_out + i] * scale);
    bd[o] = static_cast<T>(bn.beta.data()[o] - bn.running_mean.data()[o] * scale);
  }
  weight = w;
  bias = b;
  folded = true;
}

template <typename T>
std::size_t ConvBn<T>::macs(std::size_t h, std::size_t w) const {
  const Shape ks = weight.shape();
  return out_extent(h) * out_extent(w) * ks.n * ks.c * ks.h * ks.w;
}

template Tensor<float> init_conv_weight<float>(Rng&, Shape);
template Tensor<double> init_conv_weight<double>(Rng&, Shape);
template struct ConvBn<float>;
template struct ConvBn<double>;

}  // namespace mgc
