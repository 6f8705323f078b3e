#include "mgc/bench.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>

#include "mgc/mixer.hpp"
#include "mgc/random.hpp"

namespace mgc {

std::vector<BenchRecord> run_graph_bench(const BenchOptions& options) {
  if (options.reps < 10) {
    throw std::invalid_argument("bench-graph: reps must be at least 10, got " + std::to_string(options.reps));
  }
  Rng rng(options.seed);
  std::vector<BenchRecord> out;
  for (std::size_t r : options.resolutions) {
    for (GraphSpec spec : {GraphSpec{GraphVariant::svga, options.k}, GraphSpec{GraphVariant::mgc, options.l}}) {
      const GraphPattern pattern = build_pattern(spec, r, r);
      const std::size_t expected = expected_connections(spec, r, r);
      if (pattern.connections_per_token() != expected) {
        throw std::logic_error(std::string("bench-graph: ") + variant_name(spec.variant) + " pattern on " +
                               std::to_string(r) + "x" + std::to_string(r) + " has " +
                               std::to_string(pattern.connections_per_token()) + " connections, formula gives " +
                               std::to_string(expected));
      }
      const std::size_t c = options.channels;
      const Tensor<float> x = rng.uniform_tensor<float>(Shape{1, c, r, r}, -1.0, 1.0);
      Tape<float> tape(false);
      for (std::size_t i = 0; i < options.warmup; ++i) max_relative_features(tape, x, pattern);
      std::vector<double> times;
      for (std::size_t i = 0; i < options.reps; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        const Tensor<float> y = max_relative_features(tape, x, pattern);
        const auto t1 = std::chrono::steady_clock::now();
        times.push_back(std::max(1.0, static_cast<double>(std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count())));
      }
      std::sort(times.begin(), times.end());
      const std::size_t m = times.size();
      const double median = m % 2 ? times[m / 2] : 0.5 * (times[m / 2 - 1] + times[m / 2]);
      BenchRecord rec;
      rec.variant = spec.variant;
      rec.param = spec.param;
      rec.height = r;
      rec.width = r;
      rec.connections_per_token = pattern.connections_per_token();
      rec.mixer_macs = r * r * 2 * c * c;
      rec.memory_ops = pattern.shifts().size() * r * r * c;
      rec.wall_ns = median;
      rec.reps = options.reps;
      rec.warmup = options.warmup;
      out.push_back(rec);
    }
  }
  return out;
}

csv::Table bench_to_table(const std::vector<BenchRecord>& records, const BenchOptions& options) {
  csv::Table t;
  t.comments = {
      "graph mixer scaling benchmark",
      "wall_ns: median of reps timed runs after warmup untimed runs, single thread, batch 1, channels " +
          std::to_string(options.channels),
      "timing covers max-relative aggregation only; connections_per_token is checked against the closed form",
      "mixer_macs: 2C->C projection after aggregation; memory_ops: shifted elements",
  };
  t.header = {"variant", "param",      "height",  "width", "connections_per_token",
              "mixer_macs", "memory_ops", "wall_ns", "reps",  "warmup"};
  for (const BenchRecord& r : records) {
    t.rows.push_back({variant_name(r.variant), std::to_string(r.param), std::to_string(r.height),
                      std::to_string(r.width), std::to_string(r.connections_per_token), std::to_string(r.mixer_macs),
                      std::to_string(r.memory_ops), csv::format_double(r.wall_ns), std::to_string(r.reps),
                      std::to_string(r.warmup)});
  }
  return t;
}

std::vector<BenchRecord> bench_from_table(const csv::Table& table) {
  std::vector<std::size_t> col;
  for (const char* name : {"variant", "param", "height", "width", "connections_per_token", "mixer_macs", "memory_ops",
                           "wall_ns", "reps", "warmup"}) {
    col.push_back(csv::column(table, name));
  }
  auto u = [](const std::string& s) { return static_cast<std::size_t>(csv::parse_int(s)); };
  std::vector<BenchRecord> out;
  for (const auto& row : table.rows) {
    BenchRecord r;
    r.variant = parse_variant(row.at(col[0]));
    r.param = static_cast<int>(csv::parse_int(row.at(col[1])));
    r.height = u(row.at(col[2]));
    r.width = u(row.at(col[3]));
    r.connections_per_token = u(row.at(col[4]));
    r.mixer_macs = u(row.at(col[5]));
    r.memory_ops = u(row.at(col[6]));
    r.wall_ns = csv::parse_double(row.at(col[7]));
    r.reps = u(row.at(col[8]));
    r.warmup = u(row.at(col[9]));
    out.push_back(r);
  }
  return out;
}

}  // namespace mgc
