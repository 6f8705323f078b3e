#include <cstdlib>
#include <filesystem>
#include <set>
#include <string>

#include "doctest.h"
#include "mgc/ablation.hpp"
#include "mgc/bench.hpp"
#include "mgc/csv.hpp"

using namespace mgc;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(MGCKIT_BINARY) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string config(const std::string& name) { return std::string(MGCKIT_CONFIG_DIR) + "/" + name + ".json"; }

fs::path scratch() {
  const fs::path dir = fs::temp_directory_path() / "mgckit_cli";
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("exit codes") {
  CHECK(run("") == 2);
  CHECK(run("train") == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("count --config /no/such/file.json") == 2);
  CHECK(run("bench-graph --reps 3") == 2);
  CHECK(run("ablate --config " + config("synth") + " --seeds 2") == 2);
  CHECK(run("verify nonsense") == 2);
  CHECK(run("count --config " + config("toy")) == 0);
  CHECK(run("count --preset ti") == 0);
  CHECK(run("verify counts") == 0);
}

TEST_CASE("train then eval") {
  const auto out = scratch() / "run";
  const std::string flags = " --train-samples 64 --test-samples 32 --epochs 1 --batch 16";
  REQUIRE(run("train --config " + config("synth") + " --out " + out.string() + flags + " --precision f64") == 0);
  CHECK(fs::exists(out / "checkpoint.mvg2"));
  const auto log = csv::parse(csv::read_file((out / "log.csv").string()));
  CHECK(log.header == std::vector<std::string>{"step", "lr", "loss", "train_acc", "eval_acc"});
  CHECK(log.rows.size() == 1);
  CHECK(run("eval --config " + config("synth") + " --checkpoint " + (out / "checkpoint.mvg2").string() +
            " --test-samples 32 --merge-cpe --precision f64") == 0);
  CHECK(run("eval --config " + config("toy") + " --checkpoint " + (out / "checkpoint.mvg2").string()) == 2);
}

TEST_CASE("bench CSV round trip") {
  BenchOptions o;
  o.resolutions = {7, 14};
  o.reps = 10;
  o.warmup = 1;
  o.channels = 4;
  const auto records = run_graph_bench(o);
  CHECK(records.size() == 4);
  for (const auto& r : records) {
    CHECK(r.wall_ns > 0);
    CHECK(r.reps == 10);
    CHECK(r.connections_per_token == (r.variant == GraphVariant::mgc ? 5u : (r.height == 7 ? 7u : 13u)));
  }
  const auto table = bench_to_table(records, o);
  CHECK(!table.comments.empty());
  CHECK(bench_from_table(csv::parse(csv::emit(table))) == records);
  o.reps = 9;
  CHECK_THROWS(run_graph_bench(o));
  const auto path = (scratch() / "bench.csv").string();
  CHECK(run("bench-graph --resolutions 7 14 --channels 4 --csv " + path) == 0);
  CHECK(bench_from_table(csv::parse(csv::read_file(path))).size() == 4);
}

TEST_CASE("ablation table shape") {
  const auto variants = ablation_variants(synth_config());
  REQUIRE(variants.size() == 6);
  std::set<std::string> labels;
  for (const auto& v : variants) labels.insert(v.label());
  CHECK(labels.size() == 6);
  CHECK(variants[0].variant == GraphVariant::mgc);
  CHECK(variants[0].cpe);
  CHECK(variants[0].graph_stages == 3);
  CHECK(variants[4].graph_stages == 1);

  std::vector<AblationRow> rows;
  for (const auto& v : variants) {
    AblationRow r{variant_name(v.variant), v.cpe, v.graph_stages, 0, {0.5, 0.6, 0.7}, 0.6, 0.1};
    auto probe = Model<float>::build(v.config, 0);
    r.params = probe.count_params();
    rows.push_back(r);
  }
  CHECK(rows[0].params == rows[2].params);
  CHECK(rows[1].params == rows[3].params);
  CHECK(ablation_from_table(csv::parse(csv::emit(ablation_to_table(rows)))) == rows);
}

TEST_CASE("comparison verdicts") {
  AblationRow hi{"mgc", true, 3, 0, {0.9, 0.92, 0.94}, 0.92, 0.02};
  AblationRow lo{"svga", true, 3, 0, {0.7, 0.72, 0.74}, 0.72, 0.02};
  CHECK(compare("x", hi, lo).verdict == Verdict::confirmed);
  CHECK(compare("x", lo, hi).verdict == Verdict::contradicted);
  AblationRow close = hi;
  close.mean = 0.91;
  CHECK(compare("x", hi, close).verdict == Verdict::inconclusive);
  CHECK(compare("x", hi, lo).pooled_sd == doctest::Approx(0.02));
}
