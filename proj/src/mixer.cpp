#include "mgc/mixer.hpp"

#include <cstdint>
#include <stdexcept>

namespace mgc {

template <typename T>
Tensor<T> max_relative_features(Tape<T>& tape, const Tensor<T>& x, const GraphPattern& pattern) {
  const Shape s = x.shape();
  if (s.h != pattern.height() || s.w != pattern.width()) {
    throw ShapeError("max_relative_features: input " + s.str() + " does not match " +
                     std::to_string(pattern.height()) + "x" + std::to_string(pattern.width()) + " pattern");
  }
  const auto& shifts = pattern.shifts();
  const std::size_t plane = s.plane();
  Tensor<T> y(s);
  // -1 = self-loop won
  std::vector<std::int16_t> arg(s.numel(), -1);
  auto xs = x.data();
  auto ys = y.data();
  for (std::size_t p = 0; p < s.n * s.c; ++p) {
    const T* xp = xs.data() + p * plane;
    T* yp = ys.data() + p * plane;
    std::int16_t* ap = arg.data() + p * plane;
    for (std::size_t k = 0; k < shifts.size(); ++k) {
      const std::size_t sy = (static_cast<long>(s.h) + shifts[k].dy % static_cast<long>(s.h)) % s.h;
      const std::size_t sx = (static_cast<long>(s.w) + shifts[k].dx % static_cast<long>(s.w)) % s.w;
      for (std::size_t i = 0; i < s.h; ++i) {
        const T* nrow = xp + ((i + sy) % s.h) * s.w;
        const T* row = xp + i * s.w;
        T* yrow = yp + i * s.w;
        std::int16_t* arow = ap + i * s.w;
        for (std::size_t j = 0; j < s.w; ++j) {
          const T d = nrow[(j + sx) % s.w] - row[j];
          if (d > yrow[j]) {
            yrow[j] = d;
            arow[j] = static_cast<std::int16_t>(k);
          }
        }
      }
    }
  }
  if (tape.needs_grad(x)) {
    tape.record("max_relative_features", y, [x, y, s, shifts, arg = std::move(arg)]() mutable {
      const std::size_t plane = s.plane();
      auto gy = y.grad();
      auto gx = x.ensure_grad();
      for (std::size_t p = 0; p < s.n * s.c; ++p) {
        for (std::size_t i = 0; i < s.h; ++i) {
          for (std::size_t j = 0; j < s.w; ++j) {
            const std::size_t idx = p * plane + i * s.w + j;
            const std::int16_t k = arg[idx];
            if (k < 0) continue;
            const long ni = (static_cast<long>(i) + shifts[k].dy) % static_cast<long>(s.h);
            const long nj = (static_cast<long>(j) + shifts[k].dx) % static_cast<long>(s.w);
            const std::size_t ui = static_cast<std::size_t>((ni + static_cast<long>(s.h)) % static_cast<long>(s.h));
            const std::size_t uj = static_cast<std::size_t>((nj + static_cast<long>(s.w)) % static_cast<long>(s.w));
            gx[p * plane + ui * s.w + uj] += gy[idx];
            gx[idx] -= gy[idx];
          }
        }
      }
    });
  }
  return y;
}

template <typename T>
CpeParams<T> CpeParams<T>::make(Rng& rng, std::size_t channels, std::size_t kernel_size) {
  if (kernel_size % 2 == 0) {
    throw std::invalid_argument("CPE kernel size must be odd, got " + std::to_string(kernel_size));
  }
  return CpeParams{init_conv_weight<T>(rng, Shape{channels, 1, kernel_size, kernel_size}), false};
}

template <typename T>
Tensor<T> cpe_forward(Tape<T>& tape, const Tensor<T>& x, const CpeParams<T>& cpe) {
  const std::size_t pad = cpe.kernel_size() / 2;
  Tensor<T> enc = depthwise_conv2d(tape, x, cpe.kernel, 1, pad);
  return cpe.merged ? enc : add(tape, x, enc);
}

template <typename T>
CpeParams<T> cpe_merge(const CpeParams<T>& cpe) {
  if (cpe.merged) {
    throw std::logic_error("cpe_merge: positional encoding is already merged");
  }
  Tensor<T> k = cpe.kernel.clone();
  const std::size_t centre = cpe.kernel_size() / 2;
  for (std::size_t c = 0; c < k.shape().n; ++c) {
    k.at(c, 0, centre, centre) += T(1);
  }
  k.set_requires_grad(cpe.kernel.requires_grad());
  return CpeParams<T>{k, true};
}

template <typename T>
MRConvParams<T> MRConvParams<T>::make(Rng& rng, std::size_t channels) {
  MRConvParams p;
  p.w_in = ConvBn<T>::make(rng, channels, channels, 1);
  p.w_out = ConvBn<T>::make(rng, 2 * channels, channels, 1);
  return p;
}

template <typename T>
void MRConvParams<T>::visit(const std::string& prefix, const TensorVisitor<T>& f) {
  w_in.visit(prefix + ".w_in", f);
  w_out.visit(prefix + ".w_out", f);
}

template <typename T>
Tensor<T> grapher_forward(Tape<T>& tape, const Tensor<T>& x, const GraphPattern& pattern, MRConvParams<T>& mr,
                          const CpeParams<T>* cpe, Mode mode) {
  if (mr.w_out.weight.shape().c != 2 * mr.w_in.out_channels()) {
    throw ShapeError("grapher_forward: W_out takes " + std::to_string(mr.w_out.weight.shape().c) +
                     " channels, expected twice W_in's " + std::to_string(mr.w_in.out_channels()));
  }
  const Tensor<T> p = cpe ? cpe_forward(tape, x, *cpe) : x;
  const Tensor<T> f = mr.w_in.forward(tape, p, mode);
  const Tensor<T> m = max_relative_features(tape, f, pattern);
  const Tensor<T> out = mr.w_out.forward(tape, concat_channels(tape, f, m), mode);
  return add(tape, out, x);
}

template <typename T>
FfnParams<T> FfnParams<T>::make(Rng& rng, std::size_t channels, std::size_t expansion) {
  FfnParams p;
  p.w1 = ConvBn<T>::make(rng, channels, channels * expansion, 1);
  p.w2 = ConvBn<T>::make(rng, channels * expansion, channels, 1);
  return p;
}

template <typename T>
void FfnParams<T>::visit(const std::string& prefix, const TensorVisitor<T>& f) {
  w1.visit(prefix + ".w1", f);
  w2.visit(prefix + ".w2", f);
}

template <typename T>
Tensor<T> ffn_forward(Tape<T>& tape, const Tensor<T>& y, FfnParams<T>& ffn, Mode mode) {
  const Tensor<T> h = gelu(tape, ffn.w1.forward(tape, y, mode));
  return add(tape, ffn.w2.forward(tape, h, mode), y);
}

#define MGC_INSTANTIATE(T)                                                                                      \
  template Tensor<T> max_relative_features<T>(Tape<T>&, const Tensor<T>&, const GraphPattern&);                \
  template struct CpeParams<T>;                                                                                \
  template Tensor<T> cpe_forward<T>(Tape<T>&, const Tensor<T>&, const CpeParams<T>&);                          \
  template CpeParams<T> cpe_merge<T>(const CpeParams<T>&);                                                     \
  template struct MRConvParams<T>;                                                                             \
  template Tensor<T> grapher_forward<T>(Tape<T>&, const Tensor<T>&, const GraphPattern&, MRConvParams<T>&,     \
                                        const CpeParams<T>*, Mode);                                            \
  template struct FfnParams<T>;                                                                                \
  template Tensor<T> ffn_forward<T>(Tape<T>&, const Tensor<T>&, FfnParams<T>&, Mode);

MGC_INSTANTIATE(float)
MGC_INSTANTIATE(double)

}  // namespace mgc
