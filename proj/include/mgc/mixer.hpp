#pragma once

#include "mgc/graph.hpp"
#include "mgc/layers.hpp"

namespace mgc {

/// Max-relative aggregation over a static cyclic graph:
///   out[n,c,i,j] = max(0, max_s x[n,c,(i+dy_s) mod h,(j+dx_s) mod w] - x[n,c,i,j])
/// The leading 0 is the self-loop, so the output is non-negative. Ties keep
/// the earlier candidate (self first, then shifts in pattern order), which
/// fixes where the gradient goes.
template <typename T>
Tensor<T> max_relative_features(Tape<T>& tape, const Tensor<T>& x, const GraphPattern& pattern);

/// Depthwise positional encoding. Unmerged it computes x + dw(x); merged,
/// the identity branch lives in the kernel centre and it computes dw(x).
/// Zero padding, so the encoding sees image borders.
template <typename T>
struct CpeParams {
  Tensor<T> kernel;  // (c, 1, k, k), k odd
  bool merged = false;

  static CpeParams make(Rng& rng, std::size_t channels, std::size_t kernel_size);
  std::size_t kernel_size() const { return kernel.shape().h; }
};

template <typename T>
Tensor<T> cpe_forward(Tape<T>& tape, const Tensor<T>& x, const CpeParams<T>& cpe);

/// Folds the residual link into the kernel: +1 at the centre tap of every
/// channel. Throws std::logic_error if already merged.
template <typename T>
CpeParams<T> cpe_merge(const CpeParams<T>& cpe);

/// W_in (C -> C) and W_out (2C -> C) of the grapher, each conv + norm.
template <typename T>
struct MRConvParams {
  ConvBn<T> w_in;
  ConvBn<T> w_out;

  static MRConvParams make(Rng& rng, std::size_t channels);
  void visit(const std::string& prefix, const TensorVisitor<T>& f);
};

/// y = W_out(concat(f, max_relative_features(f))) + x, where
/// f = W_in(cpe_forward(x)). With `cpe` null the positional encoding is skipped.
template <typename T>
Tensor<T> grapher_forward(Tape<T>& tape, const Tensor<T>& x, const GraphPattern& pattern, MRConvParams<T>& mr,
                          const CpeParams<T>* cpe, Mode mode);

/// Two 1x1 convs with expansion, each followed by a norm.
template <typename T>
struct FfnParams {
  ConvBn<T> w1;
  ConvBn<T> w2;

  static FfnParams make(Rng& rng, std::size_t channels, std::size_t expansion);
  void visit(const std::string& prefix, const TensorVisitor<T>& f);
};

/// z = W2(gelu(W1(y))) + y.
template <typename T>
Tensor<T> ffn_forward(Tape<T>& tape, const Tensor<T>& y, FfnParams<T>& ffn, Mode mode);

}  // namespace mgc
