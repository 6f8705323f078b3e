#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mgc/config.hpp"
#include "mgc/csv.hpp"
#include "mgc/dataset.hpp"
#include "mgc/train.hpp"

namespace mgc {

/// Dataset sizes, seeds and optimizer settings for one synthetic-task run.
struct SynthProtocol {
  std::size_t train_samples = 4096;
  std::size_t test_samples = 1000;
  std::uint64_t train_data_seed = 1001;
  std::uint64_t test_data_seed = 2002;
  TrainConfig train;

  SynthTaskSpec train_spec(const ModelConfig& config) const;
  SynthTaskSpec test_spec(const ModelConfig& config) const;
};

/// Builds `config` from `model_seed`, trains it on the synthetic task and
/// returns the result; the trained model is written to `out` if non-null.
template <typename T>
TrainResult run_protocol(const ModelConfig& config, std::uint64_t model_seed, const SynthProtocol& protocol,
                         Model<T>* out = nullptr, const EpochCallback& on_epoch = {});

struct AblationVariant {
  GraphVariant variant = GraphVariant::mgc;
  bool cpe = true;
  std::size_t graph_stages = 3;
  ModelConfig config;

  std::string label() const;
};

/// The six Table-4-shaped variants of `base`:
///   MGC+CPE, MGC-CPE, SVGA+CPE, SVGA-CPE with graph blocks in stages 2-4,
///   then MGC+CPE and SVGA-CPE with every graph block moved to stage 4.
std::vector<AblationVariant> ablation_variants(const ModelConfig& base);

struct AblationRow {
  std::string variant;
  bool cpe = true;
  std::size_t stages = 3;
  std::size_t params = 0;
  std::vector<double> accuracies;
  double mean = 0;
  double sd = 0;  // sample standard deviation
  friend bool operator==(const AblationRow&, const AblationRow&) = default;
};

using AblationProgress = std::function<void(const AblationVariant&, std::uint64_t seed, double accuracy)>;

/// MGCKIT_THREADS if set to a positive integer, else the hardware
/// concurrency (at least 1).
std::size_t worker_threads();

/// Trains every variant for seeds seed0, seed0+1, ... (model and shuffle
/// seeds both vary; datasets are fixed). Runs are independent and spread
/// over `threads` workers; results do not depend on the thread count.
/// `progress` is called under a lock. Throws std::invalid_argument if
/// seeds < 3.
std::vector<AblationRow> run_ablation(const ModelConfig& base, const SynthProtocol& protocol, std::size_t seeds,
                                      std::uint64_t seed0, std::size_t threads = 1,
                                      const AblationProgress& progress = {});

enum class Verdict { confirmed, inconclusive, contradicted };
const char* verdict_name(Verdict v);

/// "better >= worse" claim checked against one pooled standard deviation
/// sqrt((sd_a^2 + sd_b^2) / 2).
struct Comparison {
  std::string claim;
  double margin = 0;
  double pooled_sd = 0;
  Verdict verdict = Verdict::inconclusive;
};

Comparison compare(const std::string& claim, const AblationRow& better, const AblationRow& worse);
/// MGC+CPE vs MGC-CPE, MGC+CPE vs SVGA+CPE, 3-stage vs 1-stage MGC+CPE.
std::vector<Comparison> ablation_comparisons(const std::vector<AblationRow>& rows);

/// Columns: variant, cpe, stages, params, mean, sd, n, accuracies
/// (semicolon-separated per-seed values).
csv::Table ablation_to_table(const std::vector<AblationRow>& rows);
std::vector<AblationRow> ablation_from_table(const csv::Table& table);

}  // namespace mgc
