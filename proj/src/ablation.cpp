#include "mgc/ablation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <numeric>
#include <stdexcept>

namespace mgc {

SynthTaskSpec SynthProtocol::train_spec(const ModelConfig& config) const {
  return {config.input_resolution, config.num_classes, train_samples, train_data_seed};
}

SynthTaskSpec SynthProtocol::test_spec(const ModelConfig& config) const {
  return {config.input_resolution, config.num_classes, test_samples, test_data_seed};
}

template <typename T>
TrainResult run_protocol(const ModelConfig& config, std::uint64_t model_seed, const SynthProtocol& protocol,
                         Model<T>* out, const EpochCallback& on_epoch) {
  const Dataset train_set = generate_dataset(protocol.train_spec(config));
  const Dataset test_set = generate_dataset(protocol.test_spec(config));
  Model<T> model = Model<T>::build(config, model_seed);
  TrainResult r = train(model, train_set, test_set, protocol.train, on_epoch);
  if (out) *out = std::move(model);
  return r;
}

template TrainResult run_protocol<float>(const ModelConfig&, std::uint64_t, const SynthProtocol&, Model<float>*,
                                         const EpochCallback&);
template TrainResult run_protocol<double>(const ModelConfig&, std::uint64_t, const SynthProtocol&, Model<double>*,
                                          const EpochCallback&);

std::string AblationVariant::label() const {
  return std::string(variant_name(variant)) + (cpe ? "+cpe" : "-cpe") + "/" + std::to_string(graph_stages) + "-stage";
}

std::vector<AblationVariant> ablation_variants(const ModelConfig& base) {
  base.validate();
  if (base.local_only) throw std::invalid_argument("ablation: base config has no graph blocks");
  const std::size_t blocks = std::accumulate(base.mgc_counts.begin(), base.mgc_counts.end(), std::size_t{0});
  if (blocks == 0) throw std::invalid_argument("ablation: base config has no graph blocks");
  auto make = [&](GraphVariant v, bool cpe, std::size_t stages) {
    AblationVariant a;
    a.variant = v;
    a.cpe = cpe;
    a.graph_stages = stages;
    a.config = base;
    a.config.graph_variant = v;
    a.config.cpe_enabled = cpe;
    if (stages == 1) {
      a.config.mgc_counts = {0, 0, 0, blocks};
      a.config.mgc_distances.clear();
    }
    a.config.name = base.name + ":" + a.label();
    a.config.validate();
    return a;
  };
  return {make(GraphVariant::mgc, true, 3),  make(GraphVariant::mgc, false, 3), make(GraphVariant::svga, true, 3),
          make(GraphVariant::svga, false, 3), make(GraphVariant::mgc, true, 1),  make(GraphVariant::svga, false, 1)};
}

namespace {

void summarize(AblationRow& row) {
  const double n = static_cast<double>(row.accuracies.size());
  row.mean = std::accumulate(row.accuracies.begin(), row.accuracies.end(), 0.0) / n;
  double ss = 0;
  for (double a : row.accuracies) ss += (a - row.mean) * (a - row.mean);
  row.sd = row.accuracies.size() > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
}

}  // namespace

std::size_t worker_threads() {
  if (const char* env = std::getenv("MGCKIT_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1U, std::thread::hardware_concurrency());
}

std::vector<AblationRow> run_ablation(const ModelConfig& base, const SynthProtocol& protocol, std::size_t seeds,
                                      std::uint64_t seed0, std::size_t threads, const AblationProgress& progress) {
  if (seeds < 3) throw std::invalid_argument("ablation: need at least 3 seeds, got " + std::to_string(seeds));
  const auto variants = ablation_variants(base);
  const Dataset train_set = generate_dataset(protocol.train_spec(base));
  const Dataset test_set = generate_dataset(protocol.test_spec(base));
  const std::size_t jobs = variants.size() * seeds;
  std::vector<double> acc(jobs, 0.0);
  std::atomic<std::size_t> next{0};
  std::mutex lock;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs; j = next++) {
      const AblationVariant& v = variants[j / seeds];
      const std::uint64_t seed = seed0 + j % seeds;
      try {
        Model<float> model = Model<float>::build(v.config, seed);
        TrainConfig tc = protocol.train;
        tc.seed = seed;
        acc[j] = train(model, train_set, test_set, tc).final_eval_acc;
        std::lock_guard<std::mutex> g(lock);
        if (progress) progress(v, seed, acc[j]);
      } catch (...) {
        std::lock_guard<std::mutex> g(lock);
        if (!failure) failure = std::current_exception();
        next = jobs;
      }
    }
  };
  const std::size_t n = std::clamp<std::size_t>(threads, 1, jobs);
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<AblationRow> rows;
  for (std::size_t k = 0; k < variants.size(); ++k) {
    const AblationVariant& v = variants[k];
    AblationRow row;
    row.variant = variant_name(v.variant);
    row.cpe = v.cpe;
    row.stages = v.graph_stages;
    row.params = count_params_analytic(v.config);
    row.accuracies.assign(acc.begin() + static_cast<std::ptrdiff_t>(k * seeds),
                          acc.begin() + static_cast<std::ptrdiff_t>((k + 1) * seeds));
    summarize(row);
    rows.push_back(row);
  }
  return rows;
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::confirmed:
      return "confirmed";
    case Verdict::inconclusive:
      return "inconclusive";
    case Verdict::contradicted:
      return "contradicted";
  }
  return "?";
}

Comparison compare(const std::string& claim, const AblationRow& better, const AblationRow& worse) {
  Comparison c;
  c.claim = claim;
  c.margin = better.mean - worse.mean;
  c.pooled_sd = std::sqrt(0.5 * (better.sd * better.sd + worse.sd * worse.sd));
  if (c.margin > c.pooled_sd) {
    c.verdict = Verdict::confirmed;
  } else if (-c.margin > c.pooled_sd) {
    c.verdict = Verdict::contradicted;
  } else {
    c.verdict = Verdict::inconclusive;
  }
  return c;
}

std::vector<Comparison> ablation_comparisons(const std::vector<AblationRow>& rows) {
  auto find = [&](const std::string& variant, bool cpe, std::size_t stages) -> const AblationRow& {
    for (const auto& r : rows) {
      if (r.variant == variant && r.cpe == cpe && r.stages == stages) return r;
    }
    throw std::invalid_argument("ablation table lacks row " + variant + (cpe ? "+cpe/" : "-cpe/") +
                                std::to_string(stages) + "-stage");
  };
  const AblationRow& best = find("mgc", true, 3);
  return {compare("mgc+cpe >= mgc-cpe", best, find("mgc", false, 3)),
          compare("mgc+cpe >= svga+cpe", best, find("svga", true, 3)),
          compare("3-stage >= 1-stage (mgc+cpe)", best, find("mgc", true, 1))};
}

csv::Table ablation_to_table(const std::vector<AblationRow>& rows) {
  csv::Table t;
  t.header = {"variant", "cpe", "stages", "params", "mean", "sd", "n", "accuracies"};
  for (const auto& r : rows) {
    std::string accs;
    for (std::size_t i = 0; i < r.accuracies.size(); ++i) {
      if (i) accs += ';';
      accs += csv::format_double(r.accuracies[i]);
    }
    t.rows.push_back({r.variant, r.cpe ? "1" : "0", std::to_string(r.stages), std::to_string(r.params),
                      csv::format_double(r.mean), csv::format_double(r.sd), std::to_string(r.accuracies.size()), accs});
  }
  return t;
}

std::vector<AblationRow> ablation_from_table(const csv::Table& table) {
  std::vector<std::size_t> col;
  for (const char* name : {"variant", "cpe", "stages", "params", "mean", "sd", "n", "accuracies"}) {
    col.push_back(csv::column(table, name));
  }
  std::vector<AblationRow> out;
  for (const auto& row : table.rows) {
    AblationRow r;
    r.variant = row.at(col[0]);
    r.cpe = csv::parse_int(row.at(col[1])) != 0;
    r.stages = static_cast<std::size_t>(csv::parse_int(row.at(col[2])));
    r.params = static_cast<std::size_t>(csv::parse_int(row.at(col[3])));
    r.mean = csv::parse_double(row.at(col[4]));
    r.sd = csv::parse_double(row.at(col[5]));
    const auto n = static_cast<std::size_t>(csv::parse_int(row.at(col[6])));
    const std::string& accs = row.at(col[7]);
    std::size_t start = 0;
    while (n > 0 && start <= accs.size()) {
      const std::size_t end = std::min(accs.find(';', start), accs.size());
      r.accuracies.push_back(csv::parse_double(std::string_view(accs).substr(start, end - start)));
      start = end + 1;
    }
    if (r.accuracies.size() != n) {
      throw std::invalid_argument("ablation table: row " + r.variant + " lists " + std::to_string(r.accuracies.size()) +
                                  " accuracies, n = " + std::to_string(n));
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace mgc
