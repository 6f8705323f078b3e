#include "verify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "mgc/config.hpp"
#include "mgc/gradcheck.hpp"
#include "mgc/model.hpp"
#include "reference.hpp"

namespace mgc::verify {

namespace {

using D = double;

CheckResult within(std::string suite, std::string name, double value, double tol, std::string replay = {}) {
  return {std::move(suite), std::move(name), value <= tol, value, tol, std::move(replay)};
}

CheckResult exact(std::string suite, std::string name, bool ok, std::string replay = {}) {
  return {std::move(suite), std::move(name), ok, ok ? 0.0 : 1.0, 0.0, std::move(replay)};
}

// Distinct values spaced 2/n apart in random order, so no two differences
// between elements coincide within finite-difference reach.
Tensor<D> tie_free(Rng& rng, Shape s) {
  std::vector<D> v(s.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = -1.0 + 2.0 * static_cast<D>(i) / static_cast<D>(v.size());
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(i) - 1))]);
  }
  return Tensor<D>(s, std::move(v));
}

struct GradRunner {
  Rng rng;
  std::uint64_t seed;
  std::vector<CheckResult> out;

  // Reduces f(x) with fixed random weights so every output coordinate
  // contributes a distinct upstream gradient.
  void check(const std::string& name, double tol,
             const std::function<Tensor<D>(Tape<D>&, const Tensor<D>&)>& f, const Tensor<D>& x) {
    Tape<D> probe(false);
    const Shape ys = f(probe, x).shape();
    const Tensor<D> r = rng.uniform_tensor<D>(ys, -1.0, 1.0);
    const ScalarFn loss = [&](Tape<D>& tape, const Tensor<D>& xi) {
      const Tensor<D> y = f(tape, xi);
      return y.numel() == 1 ? mul(tape, y, r) : sum(tape, mul(tape, y, r));
    };
    std::ostringstream replay;
    replay << "seed=" << seed << " check=" << name << " shape=" << x.shape().str();
    try {
      const GradCheckResult g = grad_check(loss, x, 1e-6);
      replay << " worst_index=" << g.worst_index << " analytic=" << g.analytic << " numeric=" << g.numeric;
      out.push_back(within("grad", name, g.max_rel_error, tol, replay.str()));
    } catch (const std::exception& e) {
      replay << " error=" << e.what();
      out.push_back({"grad", name, false, INFINITY, tol, replay.str()});
    }
  }
};

}  // namespace

const std::vector<std::string>& scopes() {
  static const std::vector<std::string> s = {"all", "grad", "oracle", "reparam", "counts"};
  return s;
}

std::vector<CheckResult> grad_suite(std::uint64_t seed) {
  GradRunner g{Rng(seed), seed, {}};
  Rng& rng = g.rng;
  constexpr double prim = 1e-6;
  constexpr double comp = 1e-4;
  const Shape xs{2, 3, 5, 5};
  const Tensor<D> x = rng.uniform_tensor<D>(xs, -1.0, 1.0);
  const Tensor<D> x2 = rng.uniform_tensor<D>(xs, -1.0, 1.0);
  const Tensor<D> w = rng.uniform_tensor<D>(Shape{4, 3, 3, 3}, -0.5, 0.5);
  const Tensor<D> b = rng.uniform_tensor<D>(Shape{1, 4, 1, 1}, -0.5, 0.5);
  const Tensor<D> dw = rng.uniform_tensor<D>(Shape{3, 1, 3, 3}, -0.5, 0.5);
  const Tensor<D> db = rng.uniform_tensor<D>(Shape{1, 3, 1, 1}, -0.5, 0.5);

  g.check("conv2d/x", prim, [&](Tape<D>& t, const Tensor<D>& v) { return conv2d(t, v, w, b, 2, 1); }, x);
  g.check("conv2d/weight", prim, [&](Tape<D>& t, const Tensor<D>& v) { return conv2d(t, x, v, b, 2, 1); }, w);
  g.check("conv2d/bias", prim, [&](Tape<D>& t, const Tensor<D>& v) { return conv2d(t, x, w, v, 2, 1); }, b);
  {
    // 1x1 on a plane of 36 takes the direct path; on 25 the patch path.
    const Tensor<D> big = rng.uniform_tensor<D>(Shape{2, 3, 6, 6}, -1.0, 1.0);
    const Tensor<D> pw = rng.uniform_tensor<D>(Shape{4, 3, 1, 1}, -0.5, 0.5);
    g.check("conv2d_1x1_large/x", prim, [&](Tape<D>& t, const Tensor<D>& v) { return conv2d(t, v, pw, b, 1, 0); }, big);
    g.check("conv2d_1x1_large/weight", prim, [&](Tape<D>& t, const Tensor<D>& v) { return conv2d(t, big, v, b, 1, 0); }, pw);
    g.check("conv2d_1x1_small/x", prim, [&](Tape<D>& t, const Tensor<D>& v) { return conv2d(t, v, pw, b, 1, 0); }, x);
    g.check("conv2d_1x1_small/weight", prim, [&](Tape<D>& t, const Tensor<D>& v) { return conv2d(t, x, v, b, 1, 0); }, pw);
  }
  g.check("depthwise_conv2d/x", prim, [&](Tape<D>& t, const Tensor<D>& v) { return depthwise_conv2d(t, v, dw, 1, 1); }, x);
  g.check("depthwise_conv2d/weight", prim, [&](Tape<D>& t, const Tensor<D>& v) { return depthwise_conv2d(t, x, v, 2, 1); }, dw);
  g.check("depthwise_conv2d/bias", prim, [&](Tape<D>& t, const Tensor<D>& v) { return depthwise_conv2d(t, x, dw, v, 1, 1); }, db);
  g.check("gelu", prim, [&](Tape<D>& t, const Tensor<D>& v) { return gelu(t, mul_scalar(t, v, 3.0)); }, x);
  {
    BatchNormState<D> bn = BatchNormState<D>::make(3);
    bn.gamma = rng.uniform_tensor<D>(Shape{1, 3, 1, 1}, 0.5, 1.5);
    bn.beta = rng.uniform_tensor<D>(Shape{1, 3, 1, 1}, -0.5, 0.5);
    bn.running_mean = rng.uniform_tensor<D>(Shape{1, 3, 1, 1}, -0.2, 0.2);
    bn.running_var = rng.uniform_tensor<D>(Shape{1, 3, 1, 1}, 0.5, 1.5);
    auto bn_with = [bn](const Tensor<D>* gamma, const Tensor<D>* beta) {
      BatchNormState<D> s = bn;
      s.running_mean = bn.running_mean.clone();
      s.running_var = bn.running_var.clone();
      if (gamma) s.gamma = *gamma;
      if (beta) s.beta = *beta;
      return s;
    };
    g.check("batchnorm2d_train/x", prim, [&](Tape<D>& t, const Tensor<D>& v) {
      auto s = bn_with(nullptr, nullptr);
      return batchnorm2d(t, v, s, Mode::train, kBatchNormMomentum, kBatchNormEps);
    }, x);
    g.check("batchnorm2d_train/gamma", prim, [&](Tape<D>& t, const Tensor<D>& v) {
      auto s = bn_with(&v, nullptr);
      return batchnorm2d(t, x, s, Mode::train, kBatchNormMomentum, kBatchNormEps);
    }, bn.gamma);
    g.check("batchnorm2d_train/beta", prim, [&](Tape<D>& t, const Tensor<D>& v) {
      auto s = bn_with(nullptr, &v);
      return batchnorm2d(t, x, s, Mode::train, kBatchNormMomentum, kBatchNormEps);
    }, bn.beta);
    g.check("batchnorm2d_eval/x", prim, [&](Tape<D>& t, const Tensor<D>& v) {
      auto s = bn_with(nullptr, nullptr);
      return batchnorm2d(t, v, s, Mode::eval, kBatchNormMomentum, kBatchNormEps);
    }, x);
  }
  g.check("circular_shift", prim, [&](Tape<D>& t, const Tensor<D>& v) { return circular_shift(t, v, 2, -1); }, x);
  g.check("add/a", prim, [&](Tape<D>& t, const Tensor<D>& v) { return add(t, v, x2); }, x);
  g.check("add/b", prim, [&](Tape<D>& t, const Tensor<D>& v) { return add(t, x, v); }, x2);
  g.check("sub/a", prim, [&](Tape<D>& t, const Tensor<D>& v) { return sub(t, v, x2); }, x);
  g.check("sub/b", prim, [&](Tape<D>& t, const Tensor<D>& v) { return sub(t, x, v); }, x2);
  g.check("mul/a", prim, [&](Tape<D>& t, const Tensor<D>& v) { return mul(t, v, x2); }, x);
  g.check("mul/b", prim, [&](Tape<D>& t, const Tensor<D>& v) { return mul(t, x, v); }, x2);
  {
    const Tensor<D> ta = tie_free(rng, xs);
    const Tensor<D> tb = tie_free(rng, xs);
    // shift b by a quarter step so no element equals its partner
    const Tensor<D> tb2 = [&] {
      Tape<D> t(false);
      return add(t, tb, Tensor<D>(xs, 0.5 / static_cast<D>(xs.numel())));
    }();
    g.check("maximum/a", prim, [&](Tape<D>& t, const Tensor<D>& v) { return maximum(t, v, tb2); }, ta);
    g.check("maximum/b", prim, [&](Tape<D>& t, const Tensor<D>& v) { return maximum(t, ta, v); }, tb2);
  }
  g.check("mul_scalar", prim, [&](Tape<D>& t, const Tensor<D>& v) { return mul_scalar(t, v, -1.7); }, x);
  g.check("concat_channels/a", prim, [&](Tape<D>& t, const Tensor<D>& v) { return concat_channels(t, v, x2); }, x);
  g.check("concat_channels/b", prim, [&](Tape<D>& t, const Tensor<D>& v) { return concat_channels(t, x, v); }, x2);
  g.check("global_avg_pool", prim, [&](Tape<D>& t, const Tensor<D>& v) { return global_avg_pool(t, v); }, x);
  {
    const Tensor<D> feat = rng.uniform_tensor<D>(Shape{3, 5, 1, 1}, -1.0, 1.0);
    const Tensor<D> lw = rng.uniform_tensor<D>(Shape{4, 5, 1, 1}, -0.5, 0.5);
    g.check("linear/x", prim, [&](Tape<D>& t, const Tensor<D>& v) { return linear(t, v, lw, b); }, feat);
    g.check("linear/weight", prim, [&](Tape<D>& t, const Tensor<D>& v) { return linear(t, feat, v, b); }, lw);
    g.check("linear/bias", prim, [&](Tape<D>& t, const Tensor<D>& v) { return linear(t, feat, lw, v); }, b);
    const std::vector<int> labels = {0, 3, 2};
    const Tensor<D> logits = rng.uniform_tensor<D>(Shape{3, 4, 1, 1}, -2.0, 2.0);
    g.check("softmax_cross_entropy/logits", prim,
            [&](Tape<D>& t, const Tensor<D>& v) { return softmax_cross_entropy(t, v, labels); }, logits);
  }
  g.check("sum", prim, [&](Tape<D>& t, const Tensor<D>& v) { return sum(t, v); }, x);
  for (GraphSpec spec : {GraphSpec{GraphVariant::mgc, 2}, GraphSpec{GraphVariant::svga, 2}}) {
    const GraphPattern p = build_pattern(spec, 5, 5);
    g.check(std::string("max_relative_features/") + variant_name(spec.variant), prim,
            [&](Tape<D>& t, const Tensor<D>& v) { return max_relative_features(t, v, p); }, tie_free(rng, xs));
  }
  {
    const CpeParams<D> cpe = CpeParams<D>::make(rng, 3, 7);
    g.check("cpe/x", prim, [&](Tape<D>& t, const Tensor<D>& v) { return cpe_forward(t, v, cpe); }, x);
    g.check("cpe/kernel", prim, [&](Tape<D>& t, const Tensor<D>& v) {
      return cpe_forward(t, x, CpeParams<D>{v, false});
    }, cpe.kernel);
  }

  // composites, train-mode norms
  const std::size_t c = 4;
  const Tensor<D> fx = rng.uniform_tensor<D>(Shape{2, c, 5, 5}, -1.0, 1.0);
  const GraphPattern pattern = build_pattern({GraphVariant::mgc, 2}, 5, 5);
  {
    MRConvParams<D> mr = MRConvParams<D>::make(rng, c);
    CpeParams<D> cpe = CpeParams<D>::make(rng, c, 7);
    g.check("grapher/x", comp, [&](Tape<D>& t, const Tensor<D>& v) {
      return grapher_forward(t, v, pattern, mr, &cpe, Mode::train);
    }, fx);
    g.check("grapher/w_in", comp, [&](Tape<D>& t, const Tensor<D>& v) {
      MRConvParams<D> m = mr;
      m.w_in.weight = v;
      return grapher_forward(t, fx, pattern, m, &cpe, Mode::train);
    }, mr.w_in.weight);
    g.check("grapher/w_out", comp, [&](Tape<D>& t, const Tensor<D>& v) {
      MRConvParams<D> m = mr;
      m.w_out.weight = v;
      return grapher_forward(t, fx, pattern, m, &cpe, Mode::train);
    }, mr.w_out.weight);
  }
  {
    FfnParams<D> ffn = FfnParams<D>::make(rng, c, 4);
    g.check("ffn/x", comp, [&](Tape<D>& t, const Tensor<D>& v) { return ffn_forward(t, v, ffn, Mode::train); }, fx);
    g.check("ffn/w1", comp, [&](Tape<D>& t, const Tensor<D>& v) {
      FfnParams<D> f = ffn;
      f.w1.weight = v;
      return ffn_forward(t, fx, f, Mode::train);
    }, ffn.w1.weight);
  }
  {
    InvertedResidualParams<D> ir = InvertedResidualParams<D>::make(rng, c, 4);
    g.check("inverted_residual/x", comp, [&](Tape<D>& t, const Tensor<D>& v) {
      return inverted_residual_forward(t, v, ir, Mode::train);
    }, fx);
    g.check("inverted_residual/depthwise", comp, [&](Tape<D>& t, const Tensor<D>& v) {
      InvertedResidualParams<D> p = ir;
      p.depthwise.weight = v;
      return inverted_residual_forward(t, fx, p, Mode::train);
    }, ir.depthwise.weight);
  }
  {
    MgcBlockParams<D> blk = MgcBlockParams<D>::make(rng, c, 4, 7, true);
    g.check("mgc_block/x", comp, [&](Tape<D>& t, const Tensor<D>& v) {
      return mgc_block_forward(t, v, pattern, blk, Mode::train);
    }, fx);
    g.check("mgc_block/cpe", comp, [&](Tape<D>& t, const Tensor<D>& v) {
      MgcBlockParams<D> p = blk;
      p.cpe = CpeParams<D>{v, false};
      return mgc_block_forward(t, fx, pattern, p, Mode::train);
    }, blk.cpe->kernel);
    g.check("mgc_block_eval/x", comp, [&](Tape<D>& t, const Tensor<D>& v) {
      return mgc_block_forward(t, v, pattern, blk, Mode::eval);
    }, fx);
  }
  return g.out;
}

std::vector<CheckResult> oracle_suite(std::uint64_t seed, std::size_t cases) {
  std::vector<CheckResult> out;
  double worst_mr = 0;
  std::string worst_replay;
  bool neighbors_ok = true;
  std::string neighbor_replay;
  for (std::size_t k = 0; k < cases; ++k) {
    Rng rng(seed * 1000003 + k);
    const auto h = static_cast<std::size_t>(rng.uniform_int(1, 16));
    const auto w = static_cast<std::size_t>(rng.uniform_int(1, 16));
    const auto n = static_cast<std::size_t>(rng.uniform_int(1, 2));
    const auto c = static_cast<std::size_t>(rng.uniform_int(1, 3));
    const long m = static_cast<long>(std::max(h, w));
    GraphSpec spec;
    if (k % 2 == 0) {
      spec = {GraphVariant::svga, static_cast<int>(rng.uniform_int(1, std::max(1L, m)))};
    } else {
      spec = {GraphVariant::mgc, static_cast<int>(m > 1 ? rng.uniform_int(1, m - 1) : 1)};
    }
    std::ostringstream replay;
    replay << "seed=" << seed << " case=" << k << " variant=" << variant_name(spec.variant) << " param=" << spec.param
           << " n=" << n << " c=" << c << " h=" << h << " w=" << w;
    const GraphPattern pattern = build_pattern(spec, h, w);
    const Tensor<D> x = rng.uniform_tensor<D>(Shape{n, c, h, w}, -1.0, 1.0);
    Tape<D> tape(false);
    const double diff = max_abs_diff(max_relative_features(tape, x, pattern), reference::mrconv_oracle(x, pattern));
    if (diff > worst_mr || worst_replay.empty()) {
      worst_mr = std::max(worst_mr, diff);
      worst_replay = replay.str();
    }
    const auto i = static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(h) - 1));
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(w) - 1));
    if (neighbors_ok && neighbor_list(pattern, i, j) != reference::neighbors_by_rule(spec, h, w, i, j)) {
      neighbors_ok = false;
      neighbor_replay = replay.str() + " token=(" + std::to_string(i) + "," + std::to_string(j) + ")";
    }
  }
  out.push_back(within("oracle", "max_relative_features vs brute force (" + std::to_string(cases) + " cases)",
                       worst_mr, 1e-12, worst_replay));
  out.push_back(exact("oracle", "neighbor lists vs rule enumeration", neighbors_ok, neighbor_replay));

  double worst_conv = 0;
  std::string conv_replay;
  for (std::size_t k = 0; k < 40; ++k) {
    Rng rng(seed * 7919 + k);
    const auto cin = static_cast<std::size_t>(rng.uniform_int(1, 4));
    const auto kernel = static_cast<std::size_t>(2 * rng.uniform_int(0, 2) + 1);
    const auto stride = static_cast<std::size_t>(rng.uniform_int(1, 2));
    const auto pad = static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(kernel / 2)));
    const auto hw = static_cast<std::size_t>(rng.uniform_int(static_cast<long>(kernel), 9));
    const bool depthwise = k % 3 == 2;
    const std::size_t cout = depthwise ? cin : static_cast<std::size_t>(rng.uniform_int(1, 5));
    const Tensor<D> x = rng.uniform_tensor<D>(Shape{2, cin, hw, hw}, -1.0, 1.0);
    const Tensor<D> wt = rng.uniform_tensor<D>(Shape{cout, depthwise ? 1 : cin, kernel, kernel}, -1.0, 1.0);
    const Tensor<D> bias = rng.uniform_tensor<D>(Shape{1, cout, 1, 1}, -1.0, 1.0);
    Tape<D> tape(false);
    const Tensor<D> got = depthwise ? depthwise_conv2d(tape, x, wt, bias, stride, pad) : conv2d(tape, x, wt, bias, stride, pad);
    const double diff = max_abs_diff(got, reference::naive_conv2d(x, wt, bias, stride, pad, depthwise ? cin : 1));
    if (diff >= worst_conv) {
      worst_conv = diff;
      std::ostringstream r;
      r << "seed=" << seed << " conv_case=" << k << " cin=" << cin << " cout=" << cout << " k=" << kernel
        << " stride=" << stride << " pad=" << pad << " hw=" << hw << " depthwise=" << depthwise;
      conv_replay = r.str();
    }
  }
  out.push_back(within("oracle", "conv2d / depthwise vs nested loops (40 cases)", worst_conv, 1e-12, conv_replay));
  return out;
}

std::vector<CheckResult> reparam_suite(std::uint64_t seed) {
  std::vector<CheckResult> out;
  Rng rng(seed);
  const std::string replay = "seed=" + std::to_string(seed);
  {
    const CpeParams<D> cpe = CpeParams<D>::make(rng, 6, 7);
    const Tensor<D> x = rng.uniform_tensor<D>(Shape{2, 6, 9, 9}, -1.0, 1.0);
    Tape<D> t(false);
    out.push_back(within("reparam", "cpe merge (double)",
                         max_abs_diff(cpe_forward(t, x, cpe), cpe_forward(t, x, cpe_merge(cpe))), 1e-12, replay));
    const CpeParams<float> cf{cast<float>(cpe.kernel), false};
    const Tensor<float> xf = cast<float>(x);
    Tape<float> tf(false);
    out.push_back(within("reparam", "cpe merge (single)",
                         static_cast<double>(max_abs_diff(cpe_forward(tf, xf, cf), cpe_forward(tf, xf, cpe_merge(cf)))),
                         1e-5, replay));
  }
  // Whole model: a few train-mode passes give the norms non-trivial running
  // statistics before comparing eval outputs.
  auto warmed = [&](auto tag) {
    using T = decltype(tag);
    Model<T> m = Model<T>::build(synth_config(), seed);
    Rng r(seed + 1);
    for (int i = 0; i < 3; ++i) {
      Tape<T> t(false);
      m.forward(t, r.template uniform_tensor<T>(Shape{8, 3, 32, 32}, -1.0, 1.0));
    }
    m.set_mode(Mode::eval);
    return m;
  };
  const Tensor<D> batch = rng.uniform_tensor<D>(Shape{16, 3, 32, 32}, -1.0, 1.0);
  auto argmax_rows = [](const auto& logits) {
    const Shape s = logits.shape();
    std::vector<std::size_t> out(s.n);
    for (std::size_t n = 0; n < s.n; ++n) {
      auto row = logits.data().subspan(n * s.c, s.c);
      out[n] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
  };
  {
    Model<float> m = warmed(float{});
    const Tensor<float> xb = cast<float>(batch);
    Tape<float> t(false);
    const Tensor<float> before = m.forward(t, xb);
    m.merge_cpe();
    const Tensor<float> after = m.forward(t, xb);
    out.push_back(within("reparam", "model eval, merged vs unmerged cpe (single)",
                         static_cast<double>(max_abs_diff(before, after)), 1e-5, replay));
    out.push_back(exact("reparam", "model eval argmax unchanged by cpe merge", argmax_rows(before) == argmax_rows(after),
                        replay));
  }
  {
    Model<D> m = warmed(D{});
    Tape<D> t(false);
    const Tensor<D> before = m.forward(t, batch);
    m.merge_cpe();
    const Tensor<D> merged = m.forward(t, batch);
    m.fold_norms();
    const Tensor<D> folded = m.forward(t, batch);
    out.push_back(within("reparam", "model eval, merged vs unmerged cpe (double)", max_abs_diff(before, merged), 1e-12,
                         replay));
    out.push_back(within("reparam", "model eval, folded vs unfolded norms (double)", max_abs_diff(merged, folded),
                         1e-10, replay));
  }
  return out;
}

std::vector<CheckResult> counts_suite() {
  std::vector<CheckResult> out;
  const auto conn = [](GraphVariant v, int p, std::size_t r) {
    return build_pattern({v, p}, r, r).connections_per_token();
  };
  out.push_back(exact("counts", "svga K=2 on 7x7 has 7 connections", conn(GraphVariant::svga, 2, 7) == 7));
  out.push_back(exact("counts", "mgc L=2 on 7x7 has 5 connections", conn(GraphVariant::mgc, 2, 7) == 5));
  const std::vector<std::size_t> res = {7, 14, 28, 56};
  const std::vector<std::size_t> svga_expected = {7, 13, 27, 55};
  bool growth_ok = true;
  std::string growth_replay;
  for (std::size_t i = 0; i < res.size(); ++i) {
    const std::size_t r = res[i];
    const std::size_t built = conn(GraphVariant::svga, 2, r);
    const std::size_t formula = svga_connections(2, r, r);
    const std::size_t enumerated = reference::neighbors_by_rule({GraphVariant::svga, 2}, r, r, r / 2, r / 3).size();
    const std::size_t mgc_built = conn(GraphVariant::mgc, 2, r);
    const std::size_t mgc_enum = reference::neighbors_by_rule({GraphVariant::mgc, 2}, r, r, r / 2, r / 3).size();
    if (built != svga_expected[i] || formula != built || enumerated != built || mgc_built != 5 || mgc_enum != 5) {
      growth_ok = false;
      growth_replay = "resolution=" + std::to_string(r) + " svga built/formula/enumerated=" + std::to_string(built) +
                      "/" + std::to_string(formula) + "/" + std::to_string(enumerated) +
                      " mgc built/enumerated=" + std::to_string(mgc_built) + "/" + std::to_string(mgc_enum);
    }
  }
  out.push_back(exact("counts", "svga grows 7,13,27,55 and mgc stays 5 over 7..56", growth_ok, growth_replay));

  std::vector<ModelConfig> configs = {toy_config(), synth_config(), local_config()};
  for (const auto& name : preset_names()) configs.push_back(preset(name));
  for (const ModelConfig& base : configs) {
    for (GraphVariant v : {GraphVariant::mgc, GraphVariant::svga}) {
      for (bool cpe : {true, false}) {
        ModelConfig c = base;
        c.graph_variant = v;
        c.cpe_enabled = cpe;
        Model<float> m = Model<float>::build(c, 0);
        const std::size_t got = m.count_params();
        const std::size_t want = count_params_analytic(c);
        const std::size_t macs = m.count_macs(c.input_resolution);
        const std::size_t macs_want = count_macs_analytic(c, c.input_resolution);
        const std::string tag = c.name + "/" + variant_name(v) + (cpe ? "+cpe" : "-cpe");
        out.push_back(exact("counts", "params analytic == introspected: " + tag, got == want,
                            "introspected=" + std::to_string(got) + " analytic=" + std::to_string(want)));
        out.push_back(exact("counts", "macs analytic == introspected: " + tag, macs == macs_want,
                            "introspected=" + std::to_string(macs) + " analytic=" + std::to_string(macs_want)));
      }
    }
    ModelConfig svga = base;
    svga.graph_variant = GraphVariant::svga;
    ModelConfig nocpe = base;
    nocpe.cpe_enabled = false;
    const std::size_t blocks_c = [&] {
      std::size_t s = 0;
      for (std::size_t i = 0; i < kStages; ++i) s += base.mgc_counts[i] * base.stage_channels[i];
      return s;
    }();
    out.push_back(exact("counts", "svga and mgc share a parameter count: " + base.name,
                        count_params_analytic(svga) == count_params_analytic(base)));
    out.push_back(exact("counts", "cpe removes C*49 per block: " + base.name,
                        count_params_analytic(base) - count_params_analytic(nocpe) == 49 * blocks_c));
  }
  const auto rel = [](double got, double target) { return std::abs(got - target) / target; };
  const double ti = static_cast<double>(count_params_analytic(preset("ti")));
  const double bb = static_cast<double>(count_params_analytic(preset("b")));
  const double ti_macs = static_cast<double>(count_macs_analytic(preset("ti"), 224));
  out.push_back(within("counts", "ti params within 15% of 5.6M", rel(ti, 5.6e6), 0.15, "params=" + std::to_string(ti)));
  out.push_back(within("counts", "b params within 15% of 27.7M", rel(bb, 27.7e6), 0.15, "params=" + std::to_string(bb)));
  out.push_back(within("counts", "ti macs within 25% of 0.6G", rel(ti_macs, 0.6e9), 0.25,
                       "macs=" + std::to_string(ti_macs)));
  return out;
}

std::vector<CheckResult> run(const std::string& scope, std::uint64_t seed) {
  if (std::find(scopes().begin(), scopes().end(), scope) == scopes().end()) {
    throw std::invalid_argument("unknown verify scope '" + scope + "' (expected all, grad, oracle, reparam or counts)");
  }
  std::vector<CheckResult> out;
  auto append = [&](std::vector<CheckResult> r) { out.insert(out.end(), r.begin(), r.end()); };
  if (scope == "all" || scope == "grad") append(grad_suite(seed));
  if (scope == "all" || scope == "oracle") append(oracle_suite(seed));
  if (scope == "all" || scope == "reparam") append(reparam_suite(seed));
  if (scope == "all" || scope == "counts") append(counts_suite());
  return out;
}

csv::Table results_table(const std::vector<CheckResult>& results) {
  csv::Table t;
  t.header = {"suite", "check", "passed", "value", "tolerance", "replay"};
  for (const auto& r : results) {
    t.rows.push_back({r.suite, r.name, r.passed ? "1" : "0", csv::format_double(r.value),
                      csv::format_double(r.tolerance), r.replay});
  }
  return t;
}

bool all_passed(const std::vector<CheckResult>& results) {
  return std::all_of(results.begin(), results.end(), [](const CheckResult& r) { return r.passed; });
}

}  // namespace mgc::verify
