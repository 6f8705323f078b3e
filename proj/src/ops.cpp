#include "mgc/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

namespace mgc {

const char* dtype_name(DType d) {
  switch (d) {
    case DType::f32:
      return "f32";
    case DType::f64:
      return "f64";
    case DType::i32:
      return "i32";
  }
  return "?";
}

std::string Shape::str() const {
  std::ostringstream os;
  os << '(' << n << ", " << c << ", " << h << ", " << w << ')';
  return os.str();
}

template <typename T>
bool all_finite(std::span<const T> values) {
  return std::all_of(values.begin(), values.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
void check_finite(const Tensor<T>& x, const std::string& what) {
  if (!all_finite<T>(x.data())) {
    throw NonFiniteError("non-finite value in " + what);
  }
}

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError("max_abs_diff: " + a.shape().str() + " vs " + b.shape().str());
  }
  T m = 0;
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    m = std::max(m, std::abs(da[i] - db[i]));
  }
  return m;
}

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) {
    throw ShapeError(msg);
  }
}

struct ConvGeom {
  std::size_t n, c, h, w;
  std::size_t out_c, kh, kw;
  std::size_t oh, ow;
  std::size_t stride, pad, groups;
  std::size_t cin_g, cout_g;
};

ConvGeom conv_geometry(const char* op, const Shape& x, const Shape& k, std::size_t stride, std::size_t pad,
                       std::size_t groups) {
  require(stride > 0, std::string(op) + ": stride must be positive");
  require(k.c * groups == x.c,
          std::string(op) + ": kernel " + k.str() + " expects " + std::to_string(k.c * groups) +
              " input channels, input " + x.str() + " has " + std::to_string(x.c));
  require(k.n % groups == 0, std::string(op) + ": output channels not divisible by groups");
  require(k.h >= 1 && k.w >= 1, std::string(op) + ": empty kernel " + k.str());
  require(k.h <= x.h + 2 * pad && k.w <= x.w + 2 * pad,
          std::string(op) + ": kernel " + k.str() + " larger than padded input " + x.str());
  ConvGeom g{};
  g.n = x.n;
  g.c = x.c;
  g.h = x.h;
  g.w = x.w;
  g.out_c = k.n;
  g.kh = k.h;
  g.kw = k.w;
  g.oh = (x.h + 2 * pad - k.h) / stride + 1;
  g.ow = (x.w + 2 * pad - k.w) / stride + 1;
  g.stride = stride;
  g.pad = pad;
  g.groups = groups;
  g.cin_g = k.c;
  g.cout_g = k.n / groups;
  require(g.n > 0 && g.oh > 0 && g.ow > 0, std::string(op) + ": zero-sized output");
  return g;
}

// Output column range [lo, hi) whose input column ox*stride + k - pad lies
// inside [0, extent).
inline void valid_range(std::size_t out_extent, std::size_t extent, std::size_t k, const ConvGeom& g, long& lo,
                        long& hi) {
  const long s = static_cast<long>(g.stride);
  const long off = static_cast<long>(k) - static_cast<long>(g.pad);
  lo = off >= 0 ? 0 : (-off + s - 1) / s;
  const long last = static_cast<long>(extent) - 1 - off;
  hi = last < 0 ? 0 : std::min<long>(static_cast<long>(out_extent), last / s + 1);
}

template <typename T>
void conv_forward(const ConvGeom& g, const T* x, const T* wt, const T* b, T* y) {
  const std::size_t ip = g.h * g.w;
  const std::size_t op = g.oh * g.ow;
  const bool pointwise = g.kh == 1 && g.kw == 1 && g.stride == 1 && g.pad == 0;
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t oc = 0; oc < g.out_c; ++oc) {
      T* yp = y + (n * g.out_c + oc) * op;
      std::fill(yp, yp + op, b ? b[oc] : T(0));
      const std::size_t grp = oc / g.cout_g;
      for (std::size_t icg = 0; icg < g.cin_g; ++icg) {
        const std::size_t ic = grp * g.cin_g + icg;
        const T* xp = x + (n * g.c + ic) * ip;
        const T* kp = wt + (oc * g.cin_g + icg) * g.kh * g.kw;
        if (pointwise) {
          const T wv = kp[0];
          for (std::size_t p = 0; p < op; ++p) {
            yp[p] += wv * xp[p];
          }
          continue;
        }
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          long oy_lo, oy_hi;
          valid_range(g.oh, g.h, ky, g, oy_lo, oy_hi);
          for (std::size_t kx = 0; kx < g.kw; ++kx) {
            long ox_lo, ox_hi;
            valid_range(g.ow, g.w, kx, g, ox_lo, ox_hi);
            const T wv = kp[ky * g.kw + kx];
            for (long oy = oy_lo; oy < oy_hi; ++oy) {
              const std::size_t row = (oy * g.stride + ky - g.pad) * g.w + kx - g.pad;
              T* yr = yp + oy * g.ow;
              for (long ox = ox_lo; ox < ox_hi; ++ox) {
                yr[ox] += wv * xp[row + ox * g.stride];
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv_backward(const ConvGeom& g, const T* x, const T* wt, const T* gy, T* gx, T* gw, T* gb) {
  const std::size_t ip = g.h * g.w;
  const std::size_t op = g.oh * g.ow;
  const bool pointwise = g.kh == 1 && g.kw == 1 && g.stride == 1 && g.pad == 0;
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t oc = 0; oc < g.out_c; ++oc) {
      const T* gyp = gy + (n * g.out_c + oc) * op;
      if (gb) {
        T acc = 0;
        for (std::size_t p = 0; p < op; ++p) {
          acc += gyp[p];
        }
        gb[oc] += acc;
      }
      const std::size_t grp = oc / g.cout_g;
      for (std::size_t icg = 0; icg < g.cin_g; ++icg) {
        const std::size_t ic = grp * g.cin_g + icg;
        const T* xp = x + (n * g.c + ic) * ip;
        T* gxp = gx ? gx + (n * g.c + ic) * ip : nullptr;
        const std::size_t kofs = (oc * g.cin_g + icg) * g.kh * g.kw;
        if (pointwise) {
          const T wv = wt[kofs];
          if (gw) {
            T acc = 0;
            for (std::size_t p = 0; p < op; ++p) {
              acc += gyp[p] * xp[p];
            }
            gw[kofs] += acc;
          }
          if (gxp) {
            for (std::size_t p = 0; p < op; ++p) {
              gxp[p] += wv * gyp[p];
            }
          }
          continue;
        }
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          long oy_lo, oy_hi;
          valid_range(g.oh, g.h, ky, g, oy_lo, oy_hi);
          for (std::size_t kx = 0; kx < g.kw; ++kx) {
            long ox_lo, ox_hi;
            valid_range(g.ow, g.w, kx, g, ox_lo, ox_hi);
            const T wv = wt[kofs + ky * g.kw + kx];
            T acc = 0;
            for (long oy = oy_lo; oy < oy_hi; ++oy) {
              const std::size_t row = (oy * g.stride + ky - g.pad) * g.w + kx - g.pad;
              const T* gyr = gyp + oy * g.ow;
              for (long ox = ox_lo; ox < ox_hi; ++ox) {
                const std::size_t idx = row + ox * g.stride;
                acc += gyr[ox] * xp[idx];
                if (gxp) {
                  gxp[idx] += wv * gyr[ox];
                }
              }
            }
            if (gw) {
              gw[kofs + ky * g.kw + kx] += acc;
            }
          }
        }
      }
    }
  }
}

// Dense (groups == 1) convolutions go through an (n*oh*ow) x (c*kh*kw)
// patch matrix so every inner loop is a contiguous axpy.
template <typename T>
std::vector<T> im2col(const ConvGeom& g, const T* x) {
  const std::size_t k = g.c * g.kh * g.kw;
  const std::size_t p = g.oh * g.ow;
  std::vector<T> cols(g.n * p * k, T(0));
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t oy = 0; oy < g.oh; ++oy) {
      for (std::size_t ox = 0; ox < g.ow; ++ox) {
        T* cr = cols.data() + ((n * g.oh + oy) * g.ow + ox) * k;
        for (std::size_t ic = 0; ic < g.c; ++ic) {
          const T* xp = x + (n * g.c + ic) * g.h * g.w;
          for (std::size_t ky = 0; ky < g.kh; ++ky) {
            const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
            if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
            for (std::size_t kx = 0; kx < g.kw; ++kx) {
              const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
              if (ix < 0 || ix >= static_cast<long>(g.w)) continue;
              cr[(ic * g.kh + ky) * g.kw + kx] = xp[static_cast<std::size_t>(iy) * g.w + static_cast<std::size_t>(ix)];
            }
          }
        }
      }
    }
  }
  return cols;
}

template <typename T>
void dense_forward(const ConvGeom& g, const T* x, const T* wt, const T* b, T* y) {
  const std::size_t k = g.c * g.kh * g.kw;
  const std::size_t p = g.oh * g.ow;
  const std::size_t oc_n = g.out_c;
  const std::vector<T> cols = im2col(g, x);
  std::vector<T> wtt(k * oc_n);
  for (std::size_t oc = 0; oc < oc_n; ++oc) {
    for (std::size_t j = 0; j < k; ++j) wtt[j * oc_n + oc] = wt[oc * k + j];
  }
  std::vector<T> acc(oc_n);
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t q = 0; q < p; ++q) {
      for (std::size_t oc = 0; oc < oc_n; ++oc) acc[oc] = b ? b[oc] : T(0);
      const T* cr = cols.data() + (n * p + q) * k;
      for (std::size_t j = 0; j < k; ++j) {
        const T v = cr[j];
        const T* wr = wtt.data() + j * oc_n;
        for (std::size_t oc = 0; oc < oc_n; ++oc) acc[oc] += v * wr[oc];
      }
      for (std::size_t oc = 0; oc < oc_n; ++oc) y[(n * oc_n + oc) * p + q] = acc[oc];
    }
  }
}

template <typename T>
void dense_backward(const ConvGeom& g, const T* x, const T* wt, const T* gy, T* gx, T* gw, T* gb) {
  const std::size_t k = g.c * g.kh * g.kw;
  const std::size_t p = g.oh * g.ow;
  const std::size_t oc_n = g.out_c;
  if (gb) {
    for (std::size_t n = 0; n < g.n; ++n) {
      for (std::size_t oc = 0; oc < oc_n; ++oc) {
        const T* gyp = gy + (n * oc_n + oc) * p;
        T s = 0;
        for (std::size_t q = 0; q < p; ++q) s += gyp[q];
        gb[oc] += s;
      }
    }
  }
  if (!gw && !gx) return;
  const std::vector<T> cols = im2col(g, x);
  std::vector<T> grow(oc_n);
  std::vector<T> dw(gw ? k * oc_n : 0, T(0));
  std::vector<T> dcols(gx ? k : 0);
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t q = 0; q < p; ++q) {
      for (std::size_t oc = 0; oc < oc_n; ++oc) grow[oc] = gy[(n * oc_n + oc) * p + q];
      const T* cr = cols.data() + (n * p + q) * k;
      if (gw) {
        for (std::size_t oc = 0; oc < oc_n; ++oc) {
          const T gv = grow[oc];
          T* dr = dw.data() + oc * k;
          for (std::size_t j = 0; j < k; ++j) dr[j] += gv * cr[j];
        }
      }
      if (gx) {
        std::fill(dcols.begin(), dcols.end(), T(0));
        for (std::size_t oc = 0; oc < oc_n; ++oc) {
          const T gv = grow[oc];
          const T* wr = wt + oc * k;
          for (std::size_t j = 0; j < k; ++j) dcols[j] += gv * wr[j];
        }
        const std::size_t oy = q / g.ow;
        const std::size_t ox = q % g.ow;
        for (std::size_t ic = 0; ic < g.c; ++ic) {
          T* gxp = gx + (n * g.c + ic) * g.h * g.w;
          for (std::size_t ky = 0; ky < g.kh; ++ky) {
            const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
            if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
            for (std::size_t kx = 0; kx < g.kw; ++kx) {
              const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
              if (ix < 0 || ix >= static_cast<long>(g.w)) continue;
              gxp[static_cast<std::size_t>(iy) * g.w + static_cast<std::size_t>(ix)] +=
                  dcols[(ic * g.kh + ky) * g.kw + kx];
            }
          }
        }
      }
    }
  }
  if (gw) {
    for (std::size_t j = 0; j < k * oc_n; ++j) gw[j] += dw[j];
  }
}

template <typename T>
Tensor<T> conv_impl(const char* name, Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& weight,
                    const Tensor<T>& bias, std::size_t stride, std::size_t padding, std::size_t groups) {
  const ConvGeom g = conv_geometry(name, x.shape(), weight.shape(), stride, padding, groups);
  if (bias.defined()) {
    require(bias.numel() == g.out_c, std::string(name) + ": bias " + bias.shape().str() + " does not match " +
                                         std::to_string(g.out_c) + " output channels");
  }
  Tensor<T> y(Shape{g.n, g.out_c, g.oh, g.ow});
  const T* bp = bias.defined() ? bias.data().data() : nullptr;
  // Large-plane 1x1 convs are already contiguous in the direct loops.
  const bool dense = g.groups == 1 && !(g.kh == 1 && g.kw == 1 && g.stride == 1 && g.oh * g.ow >= 32);
  if (dense) {
    dense_forward<T>(g, x.data().data(), weight.data().data(), bp, y.data().data());
  } else {
    conv_forward<T>(g, x.data().data(), weight.data().data(), bp, y.data().data());
  }
  if (tape.needs_grad(x, weight, bias)) {
    tape.record(name, y, [g, dense, x, weight, bias, y]() mutable {
      T* gx = x.requires_grad() ? x.ensure_grad().data() : nullptr;
      T* gw = weight.requires_grad() ? weight.ensure_grad().data() : nullptr;
      T* gb = bias.defined() && bias.requires_grad() ? bias.ensure_grad().data() : nullptr;
      if (dense) {
        dense_backward<T>(g, x.data().data(), weight.data().data(), y.grad().data(), gx, gw, gb);
      } else {
        conv_backward<T>(g, x.data().data(), weight.data().data(), y.grad().data(), gx, gw, gb);
      }
    });
  }
  return y;
}

template <typename T>
void require_same(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
}

template <typename T>
void accumulate(const Tensor<T>& dst, std::span<const T> src, T scale = T(1)) {
  auto g = dst.ensure_grad();
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] += scale * src[i];
  }
}

constexpr double kGeluA = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluB = 0.044715;

}  // namespace

template <typename T>
Tensor<T> conv2d(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t stride, std::size_t padding) {
  return conv_impl<T>("conv2d", tape, x, weight, bias, stride, padding, 1);
}

template <typename T>
Tensor<T> depthwise_conv2d(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                           std::size_t stride, std::size_t padding) {
  require(weight.shape().c == 1 && weight.shape().n == x.shape().c,
          "depthwise_conv2d: kernel " + weight.shape().str() + " does not match input channels of " +
              x.shape().str());
  return conv_impl<T>("depthwise_conv2d", tape, x, weight, bias, stride, padding, x.shape().c);
}

template <typename T>
Tensor<T> depthwise_conv2d(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& weight, std::size_t stride,
                           std::size_t padding) {
  return depthwise_conv2d(tape, x, weight, Tensor<T>{}, stride, padding);
}

template <typename T>
T gelu_scalar(T x) {
  const T u = T(kGeluA) * (x + T(kGeluB) * x * x * x);
  return T(0.5) * x * (T(1) + std::tanh(u));
}

template <typename T>
Tensor<T> gelu(Tape<T>& tape, const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  auto xs = x.data();
  auto ys = y.data();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    ys[i] = gelu_scalar(xs[i]);
  }
  if (tape.needs_grad(x)) {
    tape.record("gelu", y, [x, y]() mutable {
      auto xs = x.data();
      auto gy = y.grad();
      auto gx = x.ensure_grad();
      for (std::size_t i = 0; i < xs.size(); ++i) {
        const T v = xs[i];
        const T t = std::tanh(T(kGeluA) * (v + T(kGeluB) * v * v * v));
        const T du = T(kGeluA) * (T(1) + T(3 * kGeluB) * v * v);
        gx[i] += gy[i] * (T(0.5) * (T(1) + t) + T(0.5) * v * (T(1) - t * t) * du);
      }
    });
  }
  return y;
}

template <typename T>
BatchNormState<T> BatchNormState<T>::make(std::size_t channels) {
  const Shape s{1, channels, 1, 1};
  return BatchNormState{Tensor<T>(s, T(1)), Tensor<T>(s, T(0)), Tensor<T>(s, T(0)), Tensor<T>(s, T(1))};
}

template <typename T>
Tensor<T> batchnorm2d(Tape<T>& tape, const Tensor<T>& x, BatchNormState<T>& bn, Mode mode, double momentum,
                      double eps) {
  const Shape s = x.shape();
  require(bn.gamma.numel() == s.c && bn.beta.numel() == s.c && bn.running_mean.numel() == s.c &&
              bn.running_var.numel() == s.c,
          "batchnorm2d: per-channel parameters of length " + std::to_string(bn.gamma.numel()) +
              " do not match input " + s.str());
  require(eps > 0, "batchnorm2d: eps must be positive");
  const std::size_t plane = s.plane();
  const std::size_t count = s.n * plane;
  std::vector<T> mean(s.c), invstd(s.c);
  auto xs = x.data();
  if (mode == Mode::train) {
    require(count > 1, "batchnorm2d: train mode needs more than one value per channel, got " + s.str());
    auto rm = bn.running_mean.data();
    auto rv = bn.running_var.data();
    for (std::size_t c = 0; c < s.c; ++c) {
      double acc = 0;
      for (std::size_t n = 0; n < s.n; ++n) {
        const T* p = xs.data() + (n * s.c + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          acc += p[i];
        }
      }
      const double mu = acc / static_cast<double>(count);
      double sq = 0;
      for (std::size_t n = 0; n < s.n; ++n) {
        const T* p = xs.data() + (n * s.c + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double d = p[i] - mu;
          sq += d * d;
        }
      }
      const double var = sq / static_cast<double>(count);
      mean[c] = static_cast<T>(mu);
      invstd[c] = static_cast<T>(1.0 / std::sqrt(var + eps));
      const double unbiased = sq / static_cast<double>(count - 1);
      rm[c] = static_cast<T>((1 - momentum) * rm[c] + momentum * mu);
      rv[c] = static_cast<T>((1 - momentum) * rv[c] + momentum * unbiased);
    }
  } else {
    auto rm = bn.running_mean.data();
    auto rv = bn.running_var.data();
    for (std::size_t c = 0; c < s.c; ++c) {
      mean[c] = rm[c];
      invstd[c] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(rv[c]) + eps));
    }
  }
  Tensor<T> y(s);
  std::vector<T> xhat(xs.size());
  auto ys = y.data();
  auto gamma = bn.gamma.data();
  auto beta = bn.beta.data();
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const std::size_t base = (n * s.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const T xh = (xs[base + i] - mean[c]) * invstd[c];
        xhat[base + i] = xh;
        ys[base + i] = gamma[c] * xh + beta[c];
      }
    }
  }
  if (tape.needs_grad(x, bn.gamma, bn.beta)) {
    tape.record("batchnorm2d",
                y, [x, y, gamma_t = bn.gamma, beta_t = bn.beta, xhat = std::move(xhat), invstd = std::move(invstd),
                    mode, s]() mutable {
                  const std::size_t plane = s.plane();
                  const T count = static_cast<T>(s.n * plane);
                  auto gy = y.grad();
                  auto gamma = gamma_t.data();
                  std::vector<T> sum_gy(s.c, T(0)), sum_gy_xhat(s.c, T(0));
                  for (std::size_t n = 0; n < s.n; ++n) {
                    for (std::size_t c = 0; c < s.c; ++c) {
                      const std::size_t base = (n * s.c + c) * plane;
                      for (std::size_t i = 0; i < plane; ++i) {
                        sum_gy[c] += gy[base + i];
                        sum_gy_xhat[c] += gy[base + i] * xhat[base + i];
                      }
                    }
                  }
                  if (gamma_t.requires_grad()) {
                    auto gg = gamma_t.ensure_grad();
                    for (std::size_t c = 0; c < s.c; ++c) gg[c] += sum_gy_xhat[c];
                  }
                  if (beta_t.requires_grad()) {
                    auto gb = beta_t.ensure_grad();
                    for (std::size_t c = 0; c < s.c; ++c) gb[c] += sum_gy[c];
                  }
                  if (!x.requires_grad()) {
                    return;
                  }
                  auto gx = x.ensure_grad();
                  for (std::size_t n = 0; n < s.n; ++n) {
                    for (std::size_t c = 0; c < s.c; ++c) {
                      const std::size_t base = (n * s.c + c) * plane;
                      const T k = gamma[c] * invstd[c];
                      if (mode == Mode::eval) {
                        for (std::size_t i = 0; i < plane; ++i) gx[base + i] += k * gy[base + i];
                        continue;
                      }
                      const T m1 = sum_gy[c] / count;
                      const T m2 = sum_gy_xhat[c] / count;
                      for (std::size_t i = 0; i < plane; ++i) {
                        gx[base + i] += k * (gy[base + i] - m1 - xhat[base + i] * m2);
                      }
                    }
                  }
                });
  }
  return y;
}

template <typename T>
Tensor<T> circular_shift(Tape<T>& tape, const Tensor<T>& x, long dy, long dx) {
  const Shape s = x.shape();
  const long h = static_cast<long>(s.h);
  const long w = static_cast<long>(s.w);
  const std::size_t sy = static_cast<std::size_t>(((dy % h) + h) % h);
  const std::size_t sx = static_cast<std::size_t>(((dx % w) + w) % w);
  Tensor<T> y(s);
  auto xs = x.data();
  auto ys = y.data();
  const std::size_t planes = s.n * s.c;
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = xs.data() + p * s.plane();
    T* dst = ys.data() + p * s.plane();
    for (std::size_t i = 0; i < s.h; ++i) {
      const std::size_t si = (i + s.h - sy) % s.h;
      for (std::size_t j = 0; j < s.w; ++j) {
        dst[i * s.w + j] = src[si * s.w + (j + s.w - sx) % s.w];
      }
    }
  }
  if (tape.needs_grad(x)) {
    tape.record("circular_shift", y, [x, y, s, sy, sx]() mutable {
      auto gy = y.grad();
      auto gx = x.ensure_grad();
      for (std::size_t p = 0; p < s.n * s.c; ++p) {
        const std::size_t base = p * s.plane();
        for (std::size_t i = 0; i < s.h; ++i) {
          const std::size_t si = (i + s.h - sy) % s.h;
          for (std::size_t j = 0; j < s.w; ++j) {
            gx[base + si * s.w + (j + s.w - sx) % s.w] += gy[base + i * s.w + j];
          }
        }
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_same("add", a, b);
  Tensor<T> y(a.shape());
  auto as = a.data();
  auto bs = b.data();
  auto ys = y.data();
  for (std::size_t i = 0; i < ys.size(); ++i) ys[i] = as[i] + bs[i];
  if (tape.needs_grad(a, b)) {
    tape.record("add", y, [a, b, y]() mutable {
      if (a.requires_grad()) accumulate<T>(a, y.grad());
      if (b.requires_grad()) accumulate<T>(b, y.grad());
    });
  }
  return y;
}

template <typename T>
Tensor<T> sub(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_same("sub", a, b);
  Tensor<T> y(a.shape());
  auto as = a.data();
  auto bs = b.data();
  auto ys = y.data();
  for (std::size_t i = 0; i < ys.size(); ++i) ys[i] = as[i] - bs[i];
  if (tape.needs_grad(a, b)) {
    tape.record("sub", y, [a, b, y]() mutable {
      if (a.requires_grad()) accumulate<T>(a, y.grad());
      if (b.requires_grad()) accumulate<T>(b, y.grad(), T(-1));
    });
  }
  return y;
}

template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_same("mul", a, b);
  Tensor<T> y(a.shape());
  auto as = a.data();
  auto bs = b.data();
  auto ys = y.data();
  for (std::size_t i = 0; i < ys.size(); ++i) ys[i] = as[i] * bs[i];
  if (tape.needs_grad(a, b)) {
    tape.record("mul", y, [a, b, y]() mutable {
      const auto gy = y.grad();
      if (a.requires_grad()) {
        auto ga = a.ensure_grad();
        auto bs = b.data();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gy[i] * bs[i];
      }
      if (b.requires_grad()) {
        auto gb = b.ensure_grad();
        auto as = a.data();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gy[i] * as[i];
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> maximum(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_same("maximum", a, b);
  Tensor<T> y(a.shape());
  auto as = a.data();
  auto bs = b.data();
  auto ys = y.data();
  for (std::size_t i = 0; i < ys.size(); ++i) ys[i] = as[i] >= bs[i] ? as[i] : bs[i];
  if (tape.needs_grad(a, b)) {
    tape.record("maximum", y, [a, b, y]() mutable {
      auto as = a.data();
      auto bs = b.data();
      auto gy = y.grad();
      if (a.requires_grad()) {
        auto ga = a.ensure_grad();
        for (std::size_t i = 0; i < gy.size(); ++i)
          if (as[i] >= bs[i]) ga[i] += gy[i];
      }
      if (b.requires_grad()) {
        auto gb = b.ensure_grad();
        for (std::size_t i = 0; i < gy.size(); ++i)
          if (!(as[i] >= bs[i])) gb[i] += gy[i];
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> mul_scalar(Tape<T>& tape, const Tensor<T>& a, T s) {
  Tensor<T> y(a.shape());
  auto as = a.data();
  auto ys = y.data();
  for (std::size_t i = 0; i < ys.size(); ++i) ys[i] = as[i] * s;
  if (tape.needs_grad(a)) {
    tape.record("mul_scalar", y, [a, y, s]() mutable { accumulate<T>(a, y.grad(), s); });
  }
  return y;
}

template <typename T>
Tensor<T> concat_channels(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  require(sa.n == sb.n && sa.h == sb.h && sa.w == sb.w,
          "concat_channels: " + sa.str() + " and " + sb.str() + " differ outside the channel axis");
  const Shape so{sa.n, sa.c + sb.c, sa.h, sa.w};
  Tensor<T> y(so);
  const std::size_t la = sa.c * sa.plane();
  const std::size_t lb = sb.c * sb.plane();
  auto as = a.data();
  auto bs = b.data();
  auto ys = y.data();
  for (std::size_t n = 0; n < sa.n; ++n) {
    std::copy_n(as.data() + n * la, la, ys.data() + n * (la + lb));
    std::copy_n(bs.data() + n * lb, lb, ys.data() + n * (la + lb) + la);
  }
  if (tape.needs_grad(a, b)) {
    tape.record("concat_channels", y, [a, b, y, la, lb, n_ = sa.n]() mutable {
      auto gy = y.grad();
      if (a.requires_grad()) {
        auto ga = a.ensure_grad();
        for (std::size_t n = 0; n < n_; ++n)
          for (std::size_t i = 0; i < la; ++i) ga[n * la + i] += gy[n * (la + lb) + i];
      }
      if (b.requires_grad()) {
        auto gb = b.ensure_grad();
        for (std::size_t n = 0; n < n_; ++n)
          for (std::size_t i = 0; i < lb; ++i) gb[n * lb + i] += gy[n * (la + lb) + la + i];
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> global_avg_pool(Tape<T>& tape, const Tensor<T>& x) {
  const Shape s = x.shape();
  Tensor<T> y(Shape{s.n, s.c, 1, 1});
  auto xs = x.data();
  auto ys = y.data();
  const std::size_t plane = s.plane();
  for (std::size_t p = 0; p < s.n * s.c; ++p) {
    T acc = 0;
    for (std::size_t i = 0; i < plane; ++i) acc += xs[p * plane + i];
    ys[p] = acc / static_cast<T>(plane);
  }
  if (tape.needs_grad(x)) {
    tape.record("global_avg_pool", y, [x, y, plane]() mutable {
      auto gy = y.grad();
      auto gx = x.ensure_grad();
      const T inv = T(1) / static_cast<T>(plane);
      for (std::size_t p = 0; p < gy.size(); ++p)
        for (std::size_t i = 0; i < plane; ++i) gx[p * plane + i] += gy[p] * inv;
    });
  }
  return y;
}

template <typename T>
Tensor<T> linear(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  const Shape s = x.shape();
  const std::size_t in = s.c * s.plane();
  const std::size_t out = weight.shape().n;
  require(weight.shape().c * weight.shape().plane() == in,
          "linear: weight " + weight.shape().str() + " does not accept " + std::to_string(in) + " inputs");
  if (bias.defined()) {
    require(bias.numel() == out, "linear: bias " + bias.shape().str() + " does not match " + std::to_string(out));
  }
  Tensor<T> y(Shape{s.n, out, 1, 1});
  auto xs = x.data();
  auto ws = weight.data();
  auto ys = y.data();
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t o = 0; o < out; ++o) {
      T acc = bias.defined() ? bias.data()[o] : T(0);
      for (std::size_t i = 0; i < in; ++i) acc += ws[o * in + i] * xs[n * in + i];
      ys[n * out + o] = acc;
    }
  }
  if (tape.needs_grad(x, weight, bias)) {
    tape.record("linear", y, [x, weight, bias, y, in, out, batch = s.n]() mutable {
      auto gy = y.grad();
      auto xs = x.data();
      auto ws = weight.data();
      if (x.requires_grad()) {
        auto gx = x.ensure_grad();
        for (std::size_t n = 0; n < batch; ++n)
          for (std::size_t o = 0; o < out; ++o)
            for (std::size_t i = 0; i < in; ++i) gx[n * in + i] += gy[n * out + o] * ws[o * in + i];
      }
      if (weight.requires_grad()) {
        auto gw = weight.ensure_grad();
        for (std::size_t n = 0; n < batch; ++n)
          for (std::size_t o = 0; o < out; ++o)
            for (std::size_t i = 0; i < in; ++i) gw[o * in + i] += gy[n * out + o] * xs[n * in + i];
      }
      if (bias.defined() && bias.requires_grad()) {
        auto gb = bias.ensure_grad();
        for (std::size_t n = 0; n < batch; ++n)
          for (std::size_t o = 0; o < out; ++o) gb[o] += gy[n * out + o];
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& x) {
  Tensor<T> y(Shape{1, 1, 1, 1});
  T acc = 0;
  for (T v : x.data()) acc += v;
  y.data()[0] = acc;
  if (tape.needs_grad(x)) {
    tape.record("sum", y, [x, y]() mutable {
      const T g = y.grad()[0];
      for (T& v : x.ensure_grad()) v += g;
    });
  }
  return y;
}

template <typename T>
Tensor<T> softmax_cross_entropy(Tape<T>& tape, const Tensor<T>& logits, std::span<const int> labels) {
  const Shape s = logits.shape();
  require(s.h == 1 && s.w == 1, "softmax_cross_entropy: logits must be (n, k, 1, 1), got " + s.str());
  require(labels.size() == s.n, "softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for batch of " +
                                    std::to_string(s.n));
  const std::size_t k = s.c;
  for (std::size_t n = 0; n < s.n; ++n) {
    if (labels[n] < 0 || static_cast<std::size_t>(labels[n]) >= k) {
      throw std::out_of_range("softmax_cross_entropy: label " + std::to_string(labels[n]) + " at index " +
                              std::to_string(n) + " outside [0, " + std::to_string(k) + ")");
    }
  }
  auto zs = logits.data();
  std::vector<T> prob(zs.size());
  double total = 0;
  for (std::size_t n = 0; n < s.n; ++n) {
    const T* z = zs.data() + n * k;
    const T zmax = *std::max_element(z, z + k);
    double denom = 0;
    for (std::size_t j = 0; j < k; ++j) denom += std::exp(static_cast<double>(z[j] - zmax));
    const double lse = static_cast<double>(zmax) + std::log(denom);
    for (std::size_t j = 0; j < k; ++j) prob[n * k + j] = static_cast<T>(std::exp(z[j] - lse));
    total += lse - static_cast<double>(z[labels[n]]);
  }
  Tensor<T> loss(Shape{1, 1, 1, 1}, static_cast<T>(total / static_cast<double>(s.n)));
  if (tape.needs_grad(logits)) {
    std::vector<int> lab(labels.begin(), labels.end());
    tape.record("softmax_cross_entropy", loss, [logits, loss, prob = std::move(prob), lab = std::move(lab), k]() mutable {
      const T g = loss.grad()[0] / static_cast<T>(lab.size());
      auto gz = logits.ensure_grad();
      for (std::size_t n = 0; n < lab.size(); ++n) {
        for (std::size_t j = 0; j < k; ++j) {
          const T onehot = static_cast<int>(j) == lab[n] ? T(1) : T(0);
          gz[n * k + j] += g * (prob[n * k + j] - onehot);
        }
      }
    });
  }
  return loss;
}

#define MGC_INSTANTIATE(T)                                                                                          \
  template bool all_finite<T>(std::span<const T>);                                                                 \
  template void check_finite<T>(const Tensor<T>&, const std::string&);                                             \
  template T max_abs_diff<T>(const Tensor<T>&, const Tensor<T>&);                                                  \
  template Tensor<T> conv2d<T>(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t,        \
                               std::size_t);                                                                       \
  template Tensor<T> depthwise_conv2d<T>(Tape<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t, std::size_t); \
  template Tensor<T> depthwise_conv2d<T>(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,          \
                                         std::size_t, std::size_t);                                                \
  template T gelu_scalar<T>(T);                                                                                    \
  template Tensor<T> gelu<T>(Tape<T>&, const Tensor<T>&);                                                          \
  template struct BatchNormState<T>;                                                                               \
  template Tensor<T> batchnorm2d<T>(Tape<T>&, const Tensor<T>&, BatchNormState<T>&, Mode, double, double);         \
  template Tensor<T> circular_shift<T>(Tape<T>&, const Tensor<T>&, long, long);                                    \
  template Tensor<T> add<T>(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                                         \
  template Tensor<T> sub<T>(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                                         \
  template Tensor<T> mul<T>(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                                         \
  template Tensor<T> maximum<T>(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> mul_scalar<T>(Tape<T>&, const Tensor<T>&, T);                                                 \
  template Tensor<T> concat_channels<T>(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> global_avg_pool<T>(Tape<T>&, const Tensor<T>&);                                               \
  template Tensor<T> linear<T>(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                    \
  template Tensor<T> sum<T>(Tape<T>&, const Tensor<T>&);                                                           \
  template Tensor<T> softmax_cross_entropy<T>(Tape<T>&, const Tensor<T>&, std::span<const int>);

MGC_INSTANTIATE(float)
MGC_INSTANTIATE(double)

}  // namespace mgc
