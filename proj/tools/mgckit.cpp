#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "mgc/ablation.hpp"
#include "mgc/bench.hpp"
#include "mgc/checkpoint.hpp"
#include "verify.hpp"

namespace fs = std::filesystem;
using namespace mgc;

namespace {

constexpr int kOk = 0;
constexpr int kPropertyFailure = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TaskFlags {
  std::size_t train_samples = SynthProtocol{}.train_samples;
  std::size_t test_samples = SynthProtocol{}.test_samples;
  std::uint64_t data_seed = SynthProtocol{}.train_data_seed;
  std::size_t epochs = 4;
  std::size_t batch = 32;
  double lr = 2e-3;
  double weight_decay = 0.05;
  std::string data_cache;

  void add(CLI::App* cmd, bool with_training) {
    cmd->add_option("--test-samples", test_samples, "Evaluation set size")->capture_default_str();
    cmd->add_option("--data-seed", data_seed,
                    "Training-set seed; the evaluation set uses seed + 1001")->capture_default_str();
    cmd->add_option("--data-cache", data_cache, "Directory for generated dataset caches (.mvgd)");
    if (!with_training) return;
    cmd->add_option("--train-samples", train_samples, "Training set size")->capture_default_str();
    cmd->add_option("--epochs", epochs, "Training epochs")->capture_default_str();
    cmd->add_option("--batch", batch, "Batch size")->capture_default_str();
    cmd->add_option("--lr", lr, "Peak learning rate (cosine to zero)")->capture_default_str();
    cmd->add_option("--weight-decay", weight_decay, "Decoupled weight decay")->capture_default_str();
  }

  SynthProtocol protocol(std::uint64_t shuffle_seed) const {
    SynthProtocol p;
    p.train_samples = train_samples;
    p.test_samples = test_samples;
    p.train_data_seed = data_seed;
    p.test_data_seed = data_seed + 1001;
    p.train.epochs = epochs;
    p.train.batch_size = batch;
    p.train.lr = lr;
    p.train.weight_decay = weight_decay;
    p.train.seed = shuffle_seed;
    return p;
  }

  Dataset dataset(const SynthTaskSpec& spec) const {
    if (data_cache.empty()) return generate_dataset(spec);
    fs::create_directories(data_cache);
    const fs::path file = fs::path(data_cache) / ("synth-r" + std::to_string(spec.resolution) + "-k" +
                                                  std::to_string(spec.num_classes) + "-n" +
                                                  std::to_string(spec.samples) + "-s" + std::to_string(spec.seed) +
                                                  ".mvgd");
    if (fs::exists(file)) return load_dataset(file.string());
    Dataset d = generate_dataset(spec);
    save_dataset(d, file.string());
    return d;
  }
};

ModelConfig config_or_preset(const std::string& path, const std::string& preset_name) {
  if (!path.empty() && !preset_name.empty()) throw UsageError("give --config or --preset, not both");
  if (!preset_name.empty()) return preset(preset_name);
  if (path.empty()) throw UsageError("--config is required");
  return load_config(path);
}

void print_row(const LogRow& r) {
  std::printf("step %6zu  lr %.3e  loss %.4f  train_acc %.4f  eval_acc %.4f\n", r.step, r.lr, r.loss, r.train_acc,
              r.eval_acc);
  std::fflush(stdout);
}

template <typename T>
int cmd_train(const ModelConfig& config, const TaskFlags& task, std::uint64_t seed, const std::string& out_dir) {
  const SynthProtocol p = task.protocol(seed);
  const Dataset train_set = task.dataset(p.train_spec(config));
  const Dataset test_set = task.dataset(p.test_spec(config));
  Model<T> model = Model<T>::build(config, seed);
  std::printf("model %s: %zu parameters, %zu MACs per image\n", config.name.c_str(), model.count_params(),
              model.count_macs(config.input_resolution));
  const TrainResult r = train(model, train_set, test_set, p.train, print_row);
  fs::create_directories(out_dir);
  const std::string ckpt = (fs::path(out_dir) / "checkpoint.mvg2").string();
  save_checkpoint(model, ckpt);
  csv::write_file((fs::path(out_dir) / "log.csv").string(), csv::emit(log_to_table(r.log)));
  csv::write_file((fs::path(out_dir) / "config.json").string(), config_to_json(config));
  std::printf("final eval accuracy %.4f\ncheckpoint %s\n", r.final_eval_acc, ckpt.c_str());
  return kOk;
}

template <typename T>
int cmd_eval(const ModelConfig& config, const TaskFlags& task, const std::string& checkpoint, bool merge) {
  Model<T> model = load_checkpoint<T>(checkpoint, config);
  const Dataset test_set = task.dataset(task.protocol(0).test_spec(config));
  model.set_mode(Mode::eval);
  if (merge) model.merge_cpe();
  std::printf("eval accuracy %.4f on %zu samples\n", evaluate(model, test_set), test_set.size());
  return kOk;
}

int cmd_verify(const std::string& scope, std::uint64_t seed, const std::string& csv_path) {
  const auto results = verify::run(scope, seed);
  for (const auto& r : results) {
    std::printf("%-4s %-8s %-60s %.3e (tol %.1e)\n", r.passed ? "PASS" : "FAIL", r.suite.c_str(), r.name.c_str(),
                r.value, r.tolerance);
    if (!r.passed) std::printf("     replay: %s\n", r.replay.c_str());
  }
  if (!csv_path.empty()) csv::write_file(csv_path, csv::emit(verify::results_table(results)));
  const bool ok = verify::all_passed(results);
  std::printf("%zu checks, %s\n", results.size(), ok ? "all passed" : "FAILURES");
  return ok ? kOk : kPropertyFailure;
}

int cmd_bench(const BenchOptions& options, const std::string& csv_path) {
  if (options.reps < 10) throw UsageError("--reps must be at least 10");
  const auto records = run_graph_bench(options);
  std::printf("%-5s %5s %6s %6s %12s %12s %12s %12s\n", "graph", "param", "height", "width", "connections",
              "mixer_macs", "memory_ops", "median_ns");
  for (const auto& r : records) {
    std::printf("%-5s %5d %6zu %6zu %12zu %12zu %12zu %12.0f\n", variant_name(r.variant), r.param, r.height, r.width,
                r.connections_per_token, r.mixer_macs, r.memory_ops, r.wall_ns);
  }
  if (!csv_path.empty()) {
    const csv::Table t = bench_to_table(records, options);
    csv::write_file(csv_path, csv::emit(t));
    if (bench_from_table(csv::parse(csv::read_file(csv_path))) != records) {
      std::fprintf(stderr, "error: %s does not parse back into the emitted records\n", csv_path.c_str());
      return kPropertyFailure;
    }
  }
  return kOk;
}

int cmd_ablate(const ModelConfig& base, const TaskFlags& task, std::size_t seeds, std::uint64_t seed0,
               const std::string& out_dir) {
  if (seeds < 3) throw UsageError("--seeds must be at least 3");
  const SynthProtocol p = task.protocol(seed0);
  const std::size_t threads = worker_threads();
  std::printf("ablation over %zu seeds on %zu worker(s)\n", seeds, threads);
  const auto rows = run_ablation(base, p, seeds, seed0, threads, [](const AblationVariant& v, std::uint64_t s, double a) {
    std::printf("  %-22s seed %llu  eval_acc %.4f\n", v.label().c_str(), static_cast<unsigned long long>(s), a);
    std::fflush(stdout);
  });
  std::printf("\n%-5s %-4s %-7s %-9s %-8s %-8s\n", "graph", "cpe", "stages", "params", "mean", "sd");
  for (const auto& r : rows) {
    std::printf("%-5s %-4s %-7zu %-9zu %-8.4f %-8.4f\n", r.variant.c_str(), r.cpe ? "yes" : "no", r.stages, r.params,
                r.mean, r.sd);
  }
  std::printf("\n");
  for (const auto& c : ablation_comparisons(rows)) {
    std::printf("%-32s margin %+.4f  pooled sd %.4f  %s\n", c.claim.c_str(), c.margin, c.pooled_sd,
                verdict_name(c.verdict));
  }
  fs::create_directories(out_dir);
  const std::string path = (fs::path(out_dir) / "ablation.csv").string();
  csv::write_file(path, csv::emit(ablation_to_table(rows)));
  std::printf("table %s\n", path.c_str());
  return kOk;
}

int cmd_count(const ModelConfig& config, std::size_t resolution) {
  if (resolution == 0) resolution = config.input_resolution;
  Model<float> model = Model<float>::build(config, 0);
  const std::size_t introspected = model.count_params();
  const std::size_t analytic = count_params_analytic(config);
  const std::size_t macs = model.count_macs(resolution);
  std::printf("config        %s\n", config.name.c_str());
  std::printf("params        %zu introspected, %zu analytic\n", introspected, analytic);
  std::printf("macs @%-4zu    %zu (%.3f G)\n", resolution, macs, static_cast<double>(macs) / 1e9);
  const auto names = preset_names();
  if (std::find(names.begin(), names.end(), config.name) != names.end()) {
    const PublishedSize t = published_size(config.name);
    const double pm = static_cast<double>(introspected) / 1e6;
    const double gm = static_cast<double>(count_macs_analytic(config, 224)) / 1e9;
    std::printf("published     %.1fM params (%+.1f%%), %.1f GMACs at 224 (%+.1f%%); widths reconstructed\n", t.params_m,
                100.0 * (pm - t.params_m) / t.params_m, t.gmacs, 100.0 * (gm - t.gmacs) / t.gmacs);
  }
  if (introspected != analytic) {
    std::fprintf(stderr, "error: analytic and introspected parameter counts differ\n");
    return kPropertyFailure;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mobile graph convolution toolkit"};
  app.require_subcommand(1);

  std::string config_path, preset_name, out_dir = "out", precision = "f32", csv_path, checkpoint, scope = "all";
  std::uint64_t seed = 0;
  std::size_t seeds = 5, reps = 10, warmup = 2, resolution = 0;
  bool merge = false;
  TaskFlags task;
  BenchOptions bench;

  auto add_precision = [&](CLI::App* c) {
    c->add_option("--precision", precision, "Arithmetic precision")->check(CLI::IsMember({"f32", "f64"}))->capture_default_str();
  };

  auto* train_cmd = app.add_subcommand("train", "Train on the synthetic relative-position task");
  train_cmd->add_option("--config", config_path, "Model config JSON")->required();
  train_cmd->add_option("--out", out_dir, "Output directory")->capture_default_str();
  train_cmd->add_option("--seed", seed, "Model and shuffle seed")->capture_default_str();
  add_precision(train_cmd);
  task.add(train_cmd, true);

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on the synthetic test set");
  eval_cmd->add_option("--config", config_path, "Model config JSON")->required();
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval_cmd->add_flag("--merge-cpe", merge, "Merge CPE residuals before evaluating");
  add_precision(eval_cmd);
  task.add(eval_cmd, false);

  auto* verify_cmd = app.add_subcommand("verify", "Run property suites");
  verify_cmd->add_option("scope", scope, "all, grad, oracle, reparam or counts")->capture_default_str();
  verify_cmd->add_option("--seed", seed, "Seed for random cases")->capture_default_str();
  verify_cmd->add_option("--csv", csv_path, "Write results as CSV");

  auto* bench_cmd = app.add_subcommand("bench-graph", "Time SVGA and MGC aggregation across resolutions");
  bench_cmd->add_option("--resolutions", bench.resolutions, "Square grid sizes")->capture_default_str();
  bench_cmd->add_option("--k", bench.k, "SVGA K")->capture_default_str();
  bench_cmd->add_option("--l", bench.l, "MGC L")->capture_default_str();
  bench_cmd->add_option("--reps", reps, "Timed repetitions (>= 10)")->capture_default_str();
  bench_cmd->add_option("--warmup", warmup, "Untimed warmup runs")->capture_default_str();
  bench_cmd->add_option("--channels", bench.channels, "Feature channels")->capture_default_str();
  bench_cmd->add_option("--seed", seed, "Input seed")->capture_default_str();
  bench_cmd->add_option("--csv", csv_path, "Write records as CSV");

  auto* ablate_cmd = app.add_subcommand("ablate", "Train the six graph/CPE/placement variants over several seeds");
  ablate_cmd->add_option("--config", config_path, "Base model config JSON")->required();
  ablate_cmd->add_option("--out", out_dir, "Output directory")->capture_default_str();
  ablate_cmd->add_option("--seeds", seeds, "Seeds per variant (>= 3)")->capture_default_str();
  ablate_cmd->add_option("--seed", seed, "First seed")->capture_default_str();
  task.add(ablate_cmd, true);

  auto* count_cmd = app.add_subcommand("count", "Parameter and MAC accounting");
  count_cmd->add_option("--config", config_path, "Model config JSON");
  count_cmd->add_option("--preset", preset_name, "Preset size")->check(CLI::IsMember(preset_names()));
  count_cmd->add_option("--resolution", resolution, "Input resolution for MACs (default: config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    const bool f64 = precision == "f64";
    if (*train_cmd) {
      const ModelConfig c = load_config(config_path);
      return f64 ? cmd_train<double>(c, task, seed, out_dir) : cmd_train<float>(c, task, seed, out_dir);
    }
    if (*eval_cmd) {
      const ModelConfig c = load_config(config_path);
      return f64 ? cmd_eval<double>(c, task, checkpoint, merge) : cmd_eval<float>(c, task, checkpoint, merge);
    }
    if (*verify_cmd) {
      if (std::find(verify::scopes().begin(), verify::scopes().end(), scope) == verify::scopes().end()) {
        throw UsageError("unknown verify scope '" + scope + "'");
      }
      return cmd_verify(scope, seed, csv_path);
    }
    if (*bench_cmd) {
      bench.reps = reps;
      bench.warmup = warmup;
      bench.seed = seed;
      return cmd_bench(bench, csv_path);
    }
    if (*ablate_cmd) return cmd_ablate(load_config(config_path), task, seeds, seed, out_dir);
    if (*count_cmd) return cmd_count(config_or_preset(config_path, preset_name), resolution);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kUsage;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kUsage;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "format error: %s\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kPropertyFailure;
  }
  return kUsage;
}
