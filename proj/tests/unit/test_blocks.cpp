#include "doctest.h"
#include "mgc/blocks.hpp"
#include "mgc/gradcheck.hpp"
#include "reference.hpp"

using namespace mgc;

namespace {

template <typename T>
void zero(Tensor<T>& t) {
  for (T& v : t.data()) v = T(0);
}

}  // namespace

TEST_CASE("inverted residual") {
  Rng rng(21);
  auto ir = InvertedResidualParams<double>::make(rng, 6, 4);
  const auto x = rng.uniform_tensor<double>({2, 6, 5, 5}, -1, 1);
  CHECK(ir.expand.out_channels() == 24);
  CHECK(ir.depthwise.weight.shape() == Shape{24, 1, 3, 3});
  SUBCASE("zero projection is the identity") {
    Tape<double> tape(false);
    zero(ir.project.weight);
    CHECK(max_abs_diff(inverted_residual_forward(tape, x, ir, Mode::eval), x) == 0.0);
  }
  SUBCASE("expand, gelu, depthwise, project") {
    Tape<double> tape(false);
    auto h = gelu(tape, ir.expand.forward(tape, x, Mode::eval));
    h = ir.depthwise.forward(tape, h, Mode::eval);
    const auto expected = add(tape, ir.project.forward(tape, h, Mode::eval), x);
    CHECK(max_abs_diff(inverted_residual_forward(tape, x, ir, Mode::eval), expected) == 0.0);
  }
  SUBCASE("parameter count") {
    std::size_t n = 0;
    ir.visit("ir", [&](const std::string&, Tensor<double>& t, TensorKind k) {
      if (k == TensorKind::parameter) n += t.numel();
    });
    // three conv kernels plus gamma and beta of three norms
    CHECK(n == 6 * 24 + 24 * 9 + 24 * 6 + 2 * (24 + 24 + 6));
  }
  SUBCASE("gradient") {
    const auto r = grad_check(
        [&](Tape<double>& t, const Tensor<double>& in) {
          auto y = inverted_residual_forward(t, in, ir, Mode::train);
          return sum(t, mul(t, y, y));
        },
        x);
    CHECK(r.max_rel_error < 1e-6);
  }
  SUBCASE("channel mismatch") {
    Tape<double> tape(false);
    CHECK_THROWS_AS(inverted_residual_forward(tape, Tensor<double>({1, 5, 5, 5}), ir, Mode::eval), ShapeError);
  }
}

TEST_CASE("MGC block") {
  Rng rng(22);
  const auto pat = build_pattern({GraphVariant::mgc, 2}, 7, 7);
  auto p = MgcBlockParams<double>::make(rng, 4, 4, 7, true);
  const auto x = rng.uniform_tensor<double>({2, 4, 7, 7}, -1, 1);
  SUBCASE("equals grapher then FFN") {
    Tape<double> tape(false);
    const auto y = grapher_forward(tape, x, pat, p.mr, &*p.cpe, Mode::eval);
    CHECK(max_abs_diff(mgc_block_forward(tape, x, pat, p, Mode::eval), ffn_forward(tape, y, p.ffn, Mode::eval)) <=
          1e-12);
  }
  SUBCASE("zero output kernels give the identity") {
    Tape<double> tape(false);
    zero(p.mr.w_out.weight);
    zero(p.ffn.w2.weight);
    CHECK(max_abs_diff(mgc_block_forward(tape, x, pat, p, Mode::eval), x) == 0.0);
  }
  SUBCASE("SVGA and MGC patterns differ") {
    Tape<double> tape(false);
    const auto svga = build_pattern({GraphVariant::svga, 2}, 7, 7);
    CHECK(max_abs_diff(mgc_block_forward(tape, x, pat, p, Mode::eval), mgc_block_forward(tape, x, svga, p, Mode::eval)) >
          1e-6);
  }
  SUBCASE("spatial mismatch") {
    Tape<double> tape(false);
    CHECK_THROWS(mgc_block_forward(tape, Tensor<double>({1, 4, 6, 6}), pat, p, Mode::eval));
  }
  SUBCASE("gradient at tie-free input") {
    const auto r = grad_check(
        [&](Tape<double>& t, const Tensor<double>& in) {
          auto y = mgc_block_forward(t, in, pat, p, Mode::train);
          return sum(t, mul(t, y, y));
        },
        x);
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("stem and downsample shapes") {
  Rng rng(23);
  Tape<float> tape(false);
  auto stem = StemParams<float>::make(rng, 3, 12);
  CHECK(stem_forward(tape, Tensor<float>({1, 3, 32, 32}), stem, Mode::eval).shape() == Shape{1, 12, 8, 8});
  CHECK(stem_forward(tape, Tensor<float>({1, 3, 224, 224}), stem, Mode::eval).shape() == Shape{1, 12, 56, 56});
  CHECK_THROWS(stem_forward(tape, Tensor<float>({1, 3, 30, 30}), stem, Mode::eval));

  auto down = DownsampleParams<float>::make(rng, 12, 20);
  CHECK(downsample_forward(tape, Tensor<float>({2, 12, 8, 8}), down, Mode::eval).shape() == Shape{2, 20, 4, 4});
  CHECK(downsample_forward(tape, Tensor<float>({1, 12, 56, 56}), down, Mode::eval).shape() == Shape{1, 20, 28, 28});
  CHECK_THROWS(downsample_forward(tape, Tensor<float>({1, 12, 7, 7}), down, Mode::eval));
}

TEST_CASE("head") {
  Rng rng(24);
  auto head = HeadParams<double>::make(rng, 6, 12, 10);
  SUBCASE("constant feature map ignores spatial size") {
    Tape<double> tape(false);
    const auto a = head_forward(tape, Tensor<double>({1, 6, 3, 3}, 0.7), head);
    const auto b = head_forward(tape, Tensor<double>({1, 6, 9, 5}, 0.7), head);
    CHECK(a.shape() == Shape{1, 10, 1, 1});
    CHECK(max_abs_diff(a, b) < 1e-14);
  }
  SUBCASE("gradient") {
    const auto r = grad_check(
        [&](Tape<double>& t, const Tensor<double>& in) {
          auto y = head_forward(t, in, head);
          return sum(t, mul(t, y, y));
        },
        rng.uniform_tensor<double>({2, 6, 3, 3}, -1, 1));
    CHECK(r.max_rel_error < 1e-6);
  }
}

TEST_CASE("norm folding") {
  Rng rng(25);
  auto cb = ConvBn<float>::make(rng, 4, 6, 3, 1, 1);
  // nontrivial statistics so folding has something to absorb
  for (float& v : cb.bn.running_mean.data()) v = static_cast<float>(rng.uniform(-0.5, 0.5));
  for (float& v : cb.bn.running_var.data()) v = static_cast<float>(rng.uniform(0.5, 2.0));
  for (float& v : cb.bn.gamma.data()) v = static_cast<float>(rng.uniform(0.5, 1.5));
  for (float& v : cb.bn.beta.data()) v = static_cast<float>(rng.uniform(-0.5, 0.5));
  const auto x = rng.uniform_tensor<float>({2, 4, 7, 7}, -1, 1);
  Tape<float> tape(false);
  const auto before = cb.forward(tape, x, Mode::eval);
  cb.fold();
  CHECK(cb.folded);
  CHECK(max_abs_diff(before, cb.forward(tape, x, Mode::eval)) < 1e-5f);
}
