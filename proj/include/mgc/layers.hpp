#pragma once

#include <functional>
#include <string>

#include "mgc/ops.hpp"
#include "mgc/random.hpp"

namespace mgc {

enum class TensorKind { parameter, buffer };

/// Called once per named tensor of a module, parameters and buffers alike.
template <typename T>
using TensorVisitor = std::function<void(const std::string& name, Tensor<T>& tensor, TensorKind kind)>;

/// Convolution weights drawn from a truncated normal with sd = 1/sqrt(fan_in).
template <typename T>
Tensor<T> init_conv_weight(Rng& rng, Shape shape);

/// Convolution followed by batch norm. The conv carries no bias until
/// fold() absorbs the eval-mode norm into weight and bias.
template <typename T>
struct ConvBn {
  Tensor<T> weight;
  Tensor<T> bias;
  BatchNormState<T> bn;
  std::size_t stride = 1;
  std::size_t padding = 0;
  bool depthwise = false;
  bool folded = false;

  static ConvBn make(Rng& rng, std::size_t in_c, std::size_t out_c, std::size_t kernel, std::size_t stride = 1,
                     std::size_t padding = 0);
  static ConvBn make_depthwise(Rng& rng, std::size_t channels, std::size_t kernel, std::size_t stride = 1,
                               std::size_t padding = 0);

  Tensor<T> forward(Tape<T>& tape, const Tensor<T>& x, Mode mode);
  void visit(const std::string& prefix, const TensorVisitor<T>& f);
  void fold();

  std::size_t out_channels() const { return weight.shape().n; }
  /// Multiply-accumulates for an input of spatial size h x w.
  std::size_t macs(std::size_t h, std::size_t w) const;
  std::size_t out_extent(std::size_t extent) const { return (extent + 2 * padding - weight.shape().h) / stride + 1; }
};

}  // namespace mgc
