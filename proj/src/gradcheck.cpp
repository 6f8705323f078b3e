#include "mgc/gradcheck.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mgc {

namespace {

double evaluate(const ScalarFn& f, const Tensor<double>& x) {
  Tape<double> tape(false);
  const Tensor<double> y = f(tape, x);
  if (y.numel() != 1) {
    throw ShapeError("grad_check: function is not scalar-valued, got " + y.shape().str());
  }
  if (!std::isfinite(y.item())) {
    throw NonFiniteError("grad_check: non-finite value during finite differencing");
  }
  return y.item();
}

}  // namespace

GradCheckResult grad_check(const ScalarFn& f, const Tensor<double>& x, double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-4)) {
    throw std::invalid_argument("grad_check: eps " + std::to_string(eps) + " outside [1e-7, 1e-4]");
  }
  Tensor<double> xa = x.clone();
  xa.set_requires_grad(true);
  Tape<double> tape;
  Tensor<double> y = f(tape, xa);
  if (y.numel() != 1) {
    throw ShapeError("grad_check: function is not scalar-valued, got " + y.shape().str());
  }
  if (auto op = tape.first_non_finite()) {
    throw NonFiniteError("grad_check: non-finite intermediate produced by " + *op);
  }
  if (tape.size() == 0) {
    // f does not depend on x at all.
    xa.ensure_grad();
  } else {
    tape.backward(y);
  }
  const auto analytic = xa.ensure_grad();

  GradCheckResult result;
  Tensor<double> xp = x.clone();
  auto d = xp.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double orig = d[i];
    d[i] = orig + eps;
    const double up = evaluate(f, xp);
    d[i] = orig - eps;
    const double down = evaluate(f, xp);
    d[i] = orig;
    const double numeric = (up - down) / (2 * eps);
    const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
    if (!std::isfinite(analytic[i])) {
      throw NonFiniteError("grad_check: non-finite analytic gradient at coordinate " + std::to_string(i));
    }
    if (i == 0 || err > result.max_rel_error) {
      result.max_rel_error = err;
      result.worst_index = i;
      result.analytic = analytic[i];
      result.numeric = numeric;
    }
  }
  return result;
}

}  // namespace mgc
