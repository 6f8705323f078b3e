#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "mgc/gradcheck.hpp"
#include "mgc/ops.hpp"
#include "mgc/random.hpp"
#include "reference.hpp"

using namespace mgc;

namespace {

Tensor<double> leaf(Tensor<double> t) {
  t.set_requires_grad(true);
  return t;
}

double gelu_formula(double x) {
  const double c = std::sqrt(2.0 / std::numbers::pi);
  return 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x)));
}

}  // namespace

TEST_CASE("tensor construction and shape errors") {
  Tensor<float> t(Shape{2, 3, 4, 5}, 1.5f);
  CHECK(t.numel() == 120);
  CHECK(t.at(1, 2, 3, 4) == 1.5f);
  CHECK(t.index(1, 0, 0, 0) == 60);
  CHECK_THROWS_AS(Tensor<float>(Shape{1, 1, 2, 2}, std::vector<float>(3)), ShapeError);
  CHECK_THROWS_AS(t.item(), ShapeError);

  Tensor<float> alias = t;
  alias.at(0, 0, 0, 0) = 7.0f;
  CHECK(t.at(0, 0, 0, 0) == 7.0f);
  Tensor<float> deep = t.clone();
  deep.at(0, 0, 0, 0) = 0.0f;
  CHECK(t.at(0, 0, 0, 0) == 7.0f);
}

TEST_CASE("check_finite names the tensor") {
  Tensor<double> t(Shape{1, 1, 1, 2}, {1.0, std::nan("")});
  try {
    check_finite(t, "logits");
    FAIL("expected NonFiniteError");
  } catch (const NonFiniteError& e) {
    CHECK(std::string(e.what()).find("logits") != std::string::npos);
  }
}

TEST_CASE("conv2d examples") {
  Tape<double> tape(false);
  Rng rng(3);
  SUBCASE("1x1 identity kernel") {
    const auto x = rng.uniform_tensor<double>({1, 1, 3, 3}, -1, 1);
    const auto y = conv2d(tape, x, Tensor<double>({1, 1, 1, 1}, 1.0), Tensor<double>(), 1, 0);
    CHECK(max_abs_diff(x, y) == 0.0);
  }
  SUBCASE("2x2 ones stride 2") {
    const auto y = conv2d(tape, Tensor<double>({1, 1, 4, 4}, 1.0), Tensor<double>({1, 1, 2, 2}, 1.0), Tensor<double>(),
                          2, 0);
    CHECK(y.shape() == Shape{1, 1, 2, 2});
    for (double v : y.data()) CHECK(v == 4.0);
  }
  SUBCASE("random against nested-loop oracle") {
    const auto x = rng.uniform_tensor<double>({2, 3, 8, 8}, -1, 1);
    const auto w = rng.uniform_tensor<double>({5, 3, 3, 3}, -1, 1);
    const auto b = rng.uniform_tensor<double>({1, 5, 1, 1}, -1, 1);
    const auto y = conv2d(tape, x, w, b, 1, 1);
    CHECK(max_abs_diff(y, reference::naive_conv2d(x, w, b, 1, 1)) <= 1e-12);
  }
  SUBCASE("output size rule") {
    const auto y = conv2d(tape, Tensor<double>({1, 2, 9, 7}), Tensor<double>({4, 2, 3, 3}), Tensor<double>(), 2, 1);
    CHECK(y.shape() == Shape{1, 4, 5, 4});
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(conv2d(tape, Tensor<double>({1, 2, 4, 4}), Tensor<double>({1, 3, 1, 1}), Tensor<double>(), 1, 0),
                    ShapeError);
    CHECK_THROWS(conv2d(tape, Tensor<double>({1, 1, 2, 2}), Tensor<double>({1, 1, 3, 3}), Tensor<double>(), 1, 0));
  }
}

TEST_CASE("depthwise_conv2d examples") {
  Tape<double> tape(false);
  Rng rng(4);
  const auto x = rng.uniform_tensor<double>({1, 4, 7, 7}, -1, 1);
  SUBCASE("zero kernel") {
    const auto y = depthwise_conv2d(tape, x, Tensor<double>({4, 1, 3, 3}), 1, 1);
    for (double v : y.data()) CHECK(v == 0.0);
  }
  SUBCASE("centre delta") {
    Tensor<double> w({4, 1, 7, 7});
    for (std::size_t c = 0; c < 4; ++c) w.at(c, 0, 3, 3) = 1.0;
    CHECK(max_abs_diff(depthwise_conv2d(tape, x, w, 1, 3), x) == 0.0);
  }
  SUBCASE("grouped oracle") {
    const auto w = rng.uniform_tensor<double>({4, 1, 7, 7}, -1, 1);
    CHECK(max_abs_diff(depthwise_conv2d(tape, x, w, 1, 3), reference::naive_conv2d(x, w, Tensor<double>(), 1, 3, 4)) <=
          1e-12);
  }
  SUBCASE("channel independence") {
    const auto w = rng.uniform_tensor<double>({4, 1, 3, 3}, -1, 1);
    auto x2 = x.clone();
    for (std::size_t i = 0; i < 7; ++i) x2.at(0, 1, i, i) += 1.0;
    const auto a = depthwise_conv2d(tape, x, w, 1, 1);
    const auto b = depthwise_conv2d(tape, x2, w, 1, 1);
    for (std::size_t c : {0u, 2u, 3u}) {
      for (std::size_t i = 0; i < 7; ++i)
        for (std::size_t j = 0; j < 7; ++j) CHECK(a.at(0, c, i, j) == b.at(0, c, i, j));
    }
  }
  CHECK_THROWS_AS(depthwise_conv2d(tape, x, Tensor<double>({3, 1, 3, 3}), 1, 1), ShapeError);
}

TEST_CASE("gelu values") {
  CHECK(gelu_scalar(0.0) == 0.0);
  CHECK(std::abs(gelu_scalar(6.0) - 6.0) < 1e-3);
  CHECK(gelu_scalar(1.0) == doctest::Approx(gelu_formula(1.0)).epsilon(1e-15));
  CHECK(gelu_scalar(-2.5) == doctest::Approx(gelu_formula(-2.5)).epsilon(1e-15));
}

TEST_CASE("batchnorm") {
  Rng rng(5);
  const auto x = rng.uniform_tensor<double>({4, 3, 5, 5}, -2, 3);
  SUBCASE("eval with unit stats is near identity") {
    Tape<double> tape(false);
    auto bn = BatchNormState<double>::make(3);
    const auto y = batchnorm2d(tape, x, bn, Mode::eval);
    CHECK(max_abs_diff(x, y) < 1e-4);
  }
  SUBCASE("train output is standardised per channel and updates running stats") {
    Tape<double> tape(false);
    auto bn = BatchNormState<double>::make(3);
    const auto y = batchnorm2d(tape, x, bn, Mode::train);
    for (std::size_t c = 0; c < 3; ++c) {
      double mean = 0, sq = 0, xmean = 0;
      for (std::size_t n = 0; n < 4; ++n)
        for (std::size_t i = 0; i < 5; ++i)
          for (std::size_t j = 0; j < 5; ++j) {
            mean += y.at(n, c, i, j);
            xmean += x.at(n, c, i, j);
          }
      mean /= 100;
      xmean /= 100;
      for (std::size_t n = 0; n < 4; ++n)
        for (std::size_t i = 0; i < 5; ++i)
          for (std::size_t j = 0; j < 5; ++j) sq += (y.at(n, c, i, j) - mean) * (y.at(n, c, i, j) - mean);
      CHECK(std::abs(mean) < 1e-6);
      CHECK(std::abs(sq / 100 - 1.0) < 1e-3);
      CHECK(bn.running_mean.at(0, c, 0, 0) == doctest::Approx(0.1 * xmean).epsilon(1e-12));
    }
  }
  SUBCASE("gradient wrt x") {
    auto bn = BatchNormState<double>::make(3);
    const auto r = grad_check(
        [&](Tape<double>& t, const Tensor<double>& in) {
          auto y = batchnorm2d(t, in, bn, Mode::train);
          return sum(t, mul(t, y, y));
        },
        rng.uniform_tensor<double>({2, 3, 3, 3}, -1, 1));
    CHECK(r.max_rel_error < 1e-4);
  }
  SUBCASE("channel mismatch") {
    Tape<double> tape(false);
    auto bn = BatchNormState<double>::make(2);
    CHECK_THROWS_AS(batchnorm2d(tape, x, bn, Mode::eval), ShapeError);
  }
}

TEST_CASE("circular_shift") {
  Tape<double> tape(false);
  Rng rng(6);
  const auto x = rng.uniform_tensor<double>({2, 2, 5, 6}, -1, 1);
  CHECK(max_abs_diff(circular_shift(tape, x, 0, 0), x) == 0.0);
  CHECK(max_abs_diff(circular_shift(tape, x, 5, 6), x) == 0.0);
  CHECK(max_abs_diff(circular_shift(tape, circular_shift(tape, x, 2, -3), -2, 3), x) == 0.0);
  CHECK(max_abs_diff(circular_shift(tape, circular_shift(tape, x, 1, 4), 3, -2), circular_shift(tape, x, 4, 2)) == 0.0);
  const auto y = circular_shift(tape, x, 1, 2);
  CHECK(y.at(1, 1, 1, 2) == x.at(1, 1, 0, 0));
  CHECK(y.at(0, 0, 0, 0) == x.at(0, 0, 4, 4));
}

TEST_CASE("elementwise, concat, pooling") {
  Rng rng(7);
  SUBCASE("max(a, a) sends the whole gradient to the first operand") {
    Tape<double> tape;
    auto a = leaf(rng.uniform_tensor<double>({1, 2, 3, 3}, -1, 1));
    auto b = leaf(a.clone());
    auto y = maximum(tape, a, b);
    CHECK(max_abs_diff(y, a) == 0.0);
    tape.backward(sum(tape, y));
    for (double g : a.grad()) CHECK(g == 1.0);
    for (double g : b.grad()) CHECK(g == 0.0);
  }
  SUBCASE("concat ordering") {
    Tape<double> tape(false);
    const auto a = rng.uniform_tensor<double>({1, 3, 2, 2}, -1, 1);
    const auto b = rng.uniform_tensor<double>({1, 5, 2, 2}, -1, 1);
    const auto y = concat_channels(tape, a, b);
    CHECK(y.shape() == Shape{1, 8, 2, 2});
    CHECK(y.at(0, 2, 1, 1) == a.at(0, 2, 1, 1));
    CHECK(y.at(0, 3, 0, 1) == b.at(0, 0, 0, 1));
    CHECK(y.at(0, 7, 1, 0) == b.at(0, 4, 1, 0));
  }
  SUBCASE("average pool of ones") {
    Tape<double> tape(false);
    const auto y = global_avg_pool(tape, Tensor<double>({1, 2, 7, 7}, 1.0));
    CHECK(y.shape() == Shape{1, 2, 1, 1});
    for (double v : y.data()) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("shape mismatch") {
    Tape<double> tape(false);
    CHECK_THROWS_AS(add(tape, Tensor<double>({1, 1, 2, 2}), Tensor<double>({1, 1, 2, 3})), ShapeError);
    CHECK_THROWS_AS(maximum(tape, Tensor<double>({1, 1, 2, 2}), Tensor<double>({1, 2, 2, 2})), ShapeError);
  }
}

TEST_CASE("softmax cross entropy") {
  SUBCASE("uniform logits") {
    Tape<double> tape(false);
    const std::vector<int> labels{2};
    CHECK(softmax_cross_entropy(tape, Tensor<double>({1, 4, 1, 1}, 0.3), labels).item() ==
          doctest::Approx(std::log(4.0)).epsilon(1e-14));
  }
  SUBCASE("saturated one-hot") {
    Tape<double> tape(false);
    Tensor<double> logits({1, 4, 1, 1});
    logits.at(0, 1, 0, 0) = 100.0;
    const std::vector<int> labels{1};
    CHECK(softmax_cross_entropy(tape, logits, labels).item() < 1e-6);
  }
  SUBCASE("gradient is softmax minus one-hot, averaged over the batch") {
    Rng rng(8);
    Tape<double> tape;
    auto logits = leaf(rng.uniform_tensor<double>({3, 5, 1, 1}, -2, 2));
    const std::vector<int> labels{0, 4, 2};
    tape.backward(softmax_cross_entropy(tape, logits, labels));
    for (std::size_t n = 0; n < 3; ++n) {
      double z = 0;
      for (std::size_t k = 0; k < 5; ++k) z += std::exp(logits.at(n, k, 0, 0));
      for (std::size_t k = 0; k < 5; ++k) {
        const double expected =
            (std::exp(logits.at(n, k, 0, 0)) / z - (static_cast<int>(k) == labels[n] ? 1.0 : 0.0)) / 3.0;
        CHECK(logits.grad()[logits.index(n, k, 0, 0)] == doctest::Approx(expected).epsilon(1e-12));
      }
    }
  }
  SUBCASE("label out of range") {
    Tape<double> tape(false);
    const std::vector<int> labels{4};
    CHECK_THROWS(softmax_cross_entropy(tape, Tensor<double>({1, 4, 1, 1}), labels));
  }
}

TEST_CASE("backward semantics") {
  Rng rng(9);
  SUBCASE("non-scalar loss rejected") {
    Tape<double> tape;
    auto x = leaf(rng.uniform_tensor<double>({1, 1, 2, 2}, -1, 1));
    auto y = gelu(tape, x);
    CHECK_THROWS_AS(tape.backward(y), ShapeError);
  }
  SUBCASE("gradients accumulate until zeroed") {
    auto x = leaf(rng.uniform_tensor<double>({1, 1, 2, 2}, -1, 1));
    for (int k = 0; k < 2; ++k) {
      Tape<double> tape;
      tape.backward(sum(tape, mul_scalar(tape, x, 3.0)));
    }
    for (double g : x.grad()) CHECK(g == 6.0);
    x.zero_grad();
    for (double g : x.grad()) CHECK(g == 0.0);
  }
}

TEST_CASE("grad_check examples") {
  Rng rng(10);
  SUBCASE("sum(gelu(x))") {
    const auto r = grad_check([](Tape<double>& t, const Tensor<double>& x) { return sum(t, gelu(t, x)); },
                              rng.uniform_tensor<double>({1, 2, 3, 3}, -3, 3));
    CHECK(r.max_rel_error < 1e-6);
  }
  SUBCASE("sum(conv2d(x, w)) wrt x") {
    const auto w = rng.uniform_tensor<double>({3, 2, 3, 3}, -1, 1);
    const auto r = grad_check(
        [&](Tape<double>& t, const Tensor<double>& x) { return sum(t, conv2d(t, x, w, Tensor<double>(), 1, 1)); },
        rng.uniform_tensor<double>({1, 2, 5, 5}, -1, 1));
    CHECK(r.max_rel_error < 1e-6);
  }
  SUBCASE("eps range enforced") {
    auto f = [](Tape<double>& t, const Tensor<double>& x) { return sum(t, x); };
    CHECK_THROWS(grad_check(f, Tensor<double>({1, 1, 1, 1}), 1e-2));
    CHECK_THROWS(grad_check(f, Tensor<double>({1, 1, 1, 1}), 1e-9));
  }
  SUBCASE("non-finite intermediate names the op") {
    auto f = [](Tape<double>& t, const Tensor<double>& x) { return sum(t, mul_scalar(t, x, 1e308)); };
    try {
      grad_check(f, Tensor<double>({1, 1, 1, 2}, 10.0));
      FAIL("expected NonFiniteError");
    } catch (const NonFiniteError& e) {
      CHECK(std::string(e.what()).find("mul_scalar") != std::string::npos);
    }
  }
}
