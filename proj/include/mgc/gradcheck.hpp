#pragma once

#include <functional>

#include "mgc/tape.hpp"
#include "mgc/tensor.hpp"

namespace mgc {

/// Scalar-valued function of one tensor, recorded on the given tape.
using ScalarFn = std::function<Tensor<double>(Tape<double>&, const Tensor<double>&)>;

struct GradCheckResult {
  double max_rel_error = 0;
  std::size_t worst_index = 0;
  double analytic = 0;
  double numeric = 0;
};

/// Compares the reverse-mode gradient of f at x with central differences.
///
/// Error per coordinate is |analytic - numeric| / max(1, |analytic|); the
/// result holds the maximum. `eps` must lie in [1e-7, 1e-4]. Throws
/// NonFiniteError naming the first op that produced a NaN/Inf.
GradCheckResult grad_check(const ScalarFn& f, const Tensor<double>& x, double eps = 1e-6);

}  // namespace mgc
