#pragma once

#include <optional>

#include "mgc/mixer.hpp"

namespace mgc {

/// expand (1x1, C -> eC) + norm, GELU, depthwise 3x3 + norm, project
/// (1x1, eC -> C) + norm, plus the skip connection.
template <typename T>
struct InvertedResidualParams {
  ConvBn<T> expand;
  ConvBn<T> depthwise;
  ConvBn<T> project;

  static InvertedResidualParams make(Rng& rng, std::size_t channels, std::size_t expansion);
  void visit(const std::string& prefix, const TensorVisitor<T>& f);
  std::size_t channels() const { return expand.weight.shape().c; }
  std::size_t macs(std::size_t h, std::size_t w) const;
};

template <typename T>
Tensor<T> inverted_residual_forward(Tape<T>& tape, const Tensor<T>& x, InvertedResidualParams<T>& p, Mode mode);

/// Grapher (CPE + max-relative conv) followed by the FFN.
template <typename T>
struct MgcBlockParams {
  std::optional<CpeParams<T>> cpe;  // absent when positional encoding is ablated
  MRConvParams<T> mr;
  FfnParams<T> ffn;

  static MgcBlockParams make(Rng& rng, std::size_t channels, std::size_t expansion, std::size_t cpe_kernel,
                             bool cpe_enabled);
  void visit(const std::string& prefix, const TensorVisitor<T>& f);
  std::size_t macs(std::size_t h, std::size_t w) const;
};

template <typename T>
Tensor<T> mgc_block_forward(Tape<T>& tape, const Tensor<T>& x, const GraphPattern& pattern, MgcBlockParams<T>& p,
                            Mode mode);

/// Two stride-2 3x3 convs: 3 -> C1/2 (norm, GELU) -> C1 (norm).
template <typename T>
struct StemParams {
  ConvBn<T> conv1;
  ConvBn<T> conv2;

  static StemParams make(Rng& rng, std::size_t in_channels, std::size_t out_channels);
  void visit(const std::string& prefix, const TensorVisitor<T>& f);
  std::size_t macs(std::size_t h, std::size_t w) const;
};

template <typename T>
Tensor<T> stem_forward(Tape<T>& tape, const Tensor<T>& image, StemParams<T>& p, Mode mode);

/// One stride-2 3x3 conv + norm, no activation.
template <typename T>
struct DownsampleParams {
  ConvBn<T> conv;

  static DownsampleParams make(Rng& rng, std::size_t in_channels, std::size_t out_channels);
  void visit(const std::string& prefix, const TensorVisitor<T>& f);
  std::size_t macs(std::size_t h, std::size_t w) const { return conv.macs(h, w); }
};

template <typename T>
Tensor<T> downsample_forward(Tape<T>& tape, const Tensor<T>& x, DownsampleParams<T>& p, Mode mode);

/// Global average pool, then linear C -> hidden, GELU, linear hidden -> classes.
template <typename T>
struct HeadParams {
  Tensor<T> w1;  // (hidden, C, 1, 1)
  Tensor<T> b1;  // (1, hidden, 1, 1)
  Tensor<T> w2;  // (classes, hidden, 1, 1)
  Tensor<T> b2;  // (1, classes, 1, 1)

  static HeadParams make(Rng& rng, std::size_t channels, std::size_t hidden, std::size_t classes);
  void visit(const std::string& prefix, const TensorVisitor<T>& f);
  std::size_t macs() const { return w1.numel() + w2.numel(); }
};

template <typename T>
Tensor<T> head_forward(Tape<T>& tape, const Tensor<T>& x, HeadParams<T>& p);

}  // namespace mgc
