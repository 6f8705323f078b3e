#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mgc/csv.hpp"

namespace mgc::verify {

struct CheckResult {
  std::string suite;
  std::string name;
  bool passed = false;
  double value = 0;
  double tolerance = 0;
  /// Everything needed to rebuild the failing case.
  std::string replay;
};

const std::vector<std::string>& scopes();

/// Finite-difference checks of every primitive (1e-6) and of grapher, FFN,
/// inverted residual and MGC block (1e-4), in double.
std::vector<CheckResult> grad_suite(std::uint64_t seed);
/// Shift-based aggregation, neighbour lists and convolutions against
/// brute-force evaluation over `cases` random shapes.
std::vector<CheckResult> oracle_suite(std::uint64_t seed, std::size_t cases = 200);
/// CPE merge and norm folding leave the eval-mode function unchanged.
std::vector<CheckResult> reparam_suite(std::uint64_t seed);
/// Connection counts and parameter / MAC accounting.
std::vector<CheckResult> counts_suite();

/// Throws std::invalid_argument for an unknown scope.
std::vector<CheckResult> run(const std::string& scope, std::uint64_t seed);

csv::Table results_table(const std::vector<CheckResult>& results);
bool all_passed(const std::vector<CheckResult>& results);

}  // namespace mgc::verify
