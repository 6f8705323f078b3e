#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mgc/csv.hpp"
#include "mgc/graph.hpp"

namespace mgc {

/// One timed max-relative aggregation over an h x w grid.
///
/// mixer_macs counts the 2C -> C projection that follows aggregation
/// (h*w*2C*C); the shifts and maxima themselves are memory ops, counted as
/// shifted elements (h*w*C per stored shift).
struct BenchRecord {
  GraphVariant variant = GraphVariant::mgc;
  int param = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t connections_per_token = 0;
  std::size_t mixer_macs = 0;
  std::size_t memory_ops = 0;
  double wall_ns = 0;
  std::size_t reps = 0;
  std::size_t warmup = 0;

  friend bool operator==(const BenchRecord&, const BenchRecord&) = default;
};

struct BenchOptions {
  std::vector<std::size_t> resolutions = {7, 14, 28, 56};
  int k = 2;
  int l = 2;
  std::size_t reps = 10;
  std::size_t warmup = 2;
  std::size_t channels = 32;
  std::uint64_t seed = 0;
};

/// SVGA then MGC rows for each resolution. Throws std::invalid_argument if
/// reps < 10, and std::logic_error if a built pattern disagrees with the
/// closed-form connection count.
std::vector<BenchRecord> run_graph_bench(const BenchOptions& options);

/// Methodology lines are written as '#' comments above the header.
csv::Table bench_to_table(const std::vector<BenchRecord>& records, const BenchOptions& options);
std::vector<BenchRecord> bench_from_table(const csv::Table& table);

}  // namespace mgc
