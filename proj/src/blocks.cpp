#include "mgc/blocks.hpp"

#include <stdexcept>

namespace mgc {

template <typename T>
InvertedResidualParams<T> InvertedResidualParams<T>::make(Rng& rng, std::size_t channels, std::size_t expansion) {
  InvertedResidualParams p;
  const std::size_t hidden = channels * expansion;
  p.expand = ConvBn<T>::make(rng, channels, hidden, 1);
  p.depthwise = ConvBn<T>::make_depthwise(rng, hidden, 3, 1, 1);
  p.project = ConvBn<T>::make(rng, hidden, channels, 1);
  return p;
}

template <typename T>
void InvertedResidualParams<T>::visit(const std::string& prefix, const TensorVisitor<T>& f) {
  expand.visit(prefix + ".expand", f);
  depthwise.visit(prefix + ".depthwise", f);
  project.visit(prefix + ".project", f);
}

template <typename T>
std::size_t InvertedResidualParams<T>::macs(std::size_t h, std::size_t w) const {
  return expand.macs(h, w) + depthwise.macs(h, w) + project.macs(h, w);
}

template <typename T>
Tensor<T> inverted_residual_forward(Tape<T>& tape, const Tensor<T>& x, InvertedResidualParams<T>& p, Mode mode) {
  if (x.shape().c != p.channels()) {
    throw ShapeError("inverted_residual_forward: block has " + std::to_string(p.channels()) +
                     " channels, input is " + x.shape().str());
  }
  Tensor<T> h = gelu(tape, p.expand.forward(tape, x, mode));
  h = p.depthwise.forward(tape, h, mode);
  h = p.project.forward(tape, h, mode);
  return add(tape, x, h);
}

template <typename T>
MgcBlockParams<T> MgcBlockParams<T>::make(Rng& rng, std::size_t channels, std::size_t expansion,
                                          std::size_t cpe_kernel, bool cpe_enabled) {
  MgcBlockParams p;
  if (cpe_enabled) p.cpe = CpeParams<T>::make(rng, channels, cpe_kernel);
  p.mr = MRConvParams<T>::make(rng, channels);
  p.ffn = FfnParams<T>::make(rng, channels, expansion);
  return p;
}

template <typename T>
void MgcBlockParams<T>::visit(const std::string& prefix, const TensorVisitor<T>& f) {
  if (cpe) f(prefix + ".cpe.kernel", cpe->kernel, TensorKind::parameter);
  mr.visit(prefix + ".grapher", f);
  ffn.visit(prefix + ".ffn", f);
}

template <typename T>
std::size_t MgcBlockParams<T>::macs(std::size_t h, std::size_t w) const {
  std::size_t total = mr.w_in.macs(h, w) + mr.w_out.macs(h, w) + ffn.w1.macs(h, w) + ffn.w2.macs(h, w);
  if (cpe) total += h * w * cpe->kernel.numel();
  return total;
}

template <typename T>
Tensor<T> mgc_block_forward(Tape<T>& tape, const Tensor<T>& x, const GraphPattern& pattern, MgcBlockParams<T>& p,
                            Mode mode) {
  const Tensor<T> y = grapher_forward(tape, x, pattern, p.mr, p.cpe ? &*p.cpe : nullptr, mode);
  return ffn_forward(tape, y, p.ffn, mode);
}

template <typename T>
StemParams<T> StemParams<T>::make(Rng& rng, std::size_t in_channels, std::size_t out_channels) {
  StemParams p;
  const std::size_t mid = (out_channels + 1) / 2;
  p.conv1 = ConvBn<T>::make(rng, in_channels, mid, 3, 2, 1);
  p.conv2 = ConvBn<T>::make(rng, mid, out_channels, 3, 2, 1);
  return p;
}

template <typename T>
void StemParams<T>::visit(const std::string& prefix, const TensorVisitor<T>& f) {
  conv1.visit(prefix + ".conv1", f);
  conv2.visit(prefix + ".conv2", f);
}

template <typename T>
std::size_t StemParams<T>::macs(std::size_t h, std::size_t w) const {
  return conv1.macs(h, w) + conv2.macs(conv1.out_extent(h), conv1.out_extent(w));
}

template <typename T>
Tensor<T> stem_forward(Tape<T>& tape, const Tensor<T>& image, StemParams<T>& p, Mode mode) {
  const Shape s = image.shape();
  if (s.h % 4 != 0 || s.w % 4 != 0) {
    throw ShapeError("stem_forward: image " + s.str() + " is not divisible by 4");
  }
  Tensor<T> h = gelu(tape, p.conv1.forward(tape, image, mode));
  return p.conv2.forward(tape, h, mode);
}

template <typename T>
DownsampleParams<T> DownsampleParams<T>::make(Rng& rng, std::size_t in_channels, std::size_t out_channels) {
  return DownsampleParams{ConvBn<T>::make(rng, in_channels, out_channels, 3, 2, 1)};
}

template <typename T>
void DownsampleParams<T>::visit(const std::string& prefix, const TensorVisitor<T>& f) {
  conv.visit(prefix + ".conv", f);
}

template <typename T>
Tensor<T> downsample_forward(Tape<T>& tape, const Tensor<T>& x, DownsampleParams<T>& p, Mode mode) {
  const Shape s = x.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0) {
    throw ShapeError("downsample_forward: odd spatial size in " + s.str());
  }
  return p.conv.forward(tape, x, mode);
}

template <typename T>
HeadParams<T> HeadParams<T>::make(Rng& rng, std::size_t channels, std::size_t hidden, std::size_t classes) {
  HeadParams p;
  p.w1 = init_conv_weight<T>(rng, Shape{hidden, channels, 1, 1});
  p.b1 = Tensor<T>(Shape{1, hidden, 1, 1});
  p.w2 = init_conv_weight<T>(rng, Shape{classes, hidden, 1, 1});
  p.b2 = Tensor<T>(Shape{1, classes, 1, 1});
  p.b1.set_requires_grad(true);
  p.b2.set_requires_grad(true);
  return p;
}

template <typename T>
void HeadParams<T>::visit(const std::string& prefix, const TensorVisitor<T>& f) {
  f(prefix + ".fc1.weight", w1, TensorKind::parameter);
  f(prefix + ".fc1.bias", b1, TensorKind::parameter);
  f(prefix + ".fc2.weight", w2, TensorKind::parameter);
  f(prefix + ".fc2.bias", b2, TensorKind::parameter);
}

template <typename T>
Tensor<T> head_forward(Tape<T>& tape, const Tensor<T>& x, HeadParams<T>& p) {
  const Tensor<T> pooled = global_avg_pool(tape, x);
  const Tensor<T> h = gelu(tape, linear(tape, pooled, p.w1, p.b1));
  return linear(tape, h, p.w2, p.b2);
}

#define MGC_INSTANTIATE(T)                                                                                      \
  template struct InvertedResidualParams<T>;                                                                   \
  template Tensor<T> inverted_residual_forward<T>(Tape<T>&, const Tensor<T>&, InvertedResidualParams<T>&, Mode); \
  template struct MgcBlockParams<T>;                                                                           \
  template Tensor<T> mgc_block_forward<T>(Tape<T>&, const Tensor<T>&, const GraphPattern&, MgcBlockParams<T>&, \
                                          Mode);                                                               \
  template struct StemParams<T>;                                                                               \
  template Tensor<T> stem_forward<T>(Tape<T>&, const Tensor<T>&, StemParams<T>&, Mode);                        \
  template struct DownsampleParams<T>;                                                                         \
  template Tensor<T> downsample_forward<T>(Tape<T>&, const Tensor<T>&, DownsampleParams<T>&, Mode);            \
  template struct HeadParams<T>;                                                                               \
  template Tensor<T> head_forward<T>(Tape<T>&, const Tensor<T>&, HeadParams<T>&);

MGC_INSTANTIATE(float)
MGC_INSTANTIATE(double)

}  // namespace mgc
