#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "doctest.h"
#include "mgc/config.hpp"
#include "mgc/model.hpp"

using namespace mgc;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename T>
std::vector<T> flat_parameters(Model<T>& m) {
  std::vector<T> out;
  for (auto& p : m.named_tensors()) out.insert(out.end(), p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

}  // namespace

TEST_CASE("toy model builds with the expected output shape") {
  auto m = Model<float>::build(toy_config(), 1);
  Tape<float> tape(false);
  Rng rng(2);
  const auto y = m.forward(tape, rng.uniform_tensor<float>({3, 3, 32, 32}, -1, 1));
  CHECK(y.shape() == Shape{3, 10, 1, 1});
  CHECK_THROWS_AS(m.forward(tape, Tensor<float>({1, 3, 64, 64})), ShapeError);
}

TEST_CASE("toy MACs match a per-layer table") {
  // stem, stage 1..4 (IR, MGC), downsamples, head at 32x32; widths 8/16/32/64
  const std::vector<std::size_t> layers{
      256 * 4 * 3 * 9, 64 * 8 * 4 * 9,                             // stem convs
      64 * 32 * 8, 64 * 32 * 9, 64 * 8 * 32,                        // stage 1 IR at 8x8
      16 * 16 * 8 * 9,                                              // down to 4x4
      16 * 64 * 16, 16 * 64 * 9, 16 * 16 * 64,                      // stage 2 IR
      16 * 16 * 49, 16 * 16 * 16, 16 * 16 * 32, 16 * 64 * 16, 16 * 16 * 64,  // stage 2 MGC
      4 * 32 * 16 * 9,                                              // down to 2x2
      4 * 128 * 32, 4 * 128 * 9, 4 * 32 * 128,                      // stage 3 IR
      4 * 32 * 49, 4 * 32 * 32, 4 * 32 * 64, 4 * 128 * 32, 4 * 32 * 128,     // stage 3 MGC
      64 * 32 * 9,                                                  // down to 1x1
      64 * 256, 256 * 9, 256 * 64,                                  // stage 4 IR
      64 * 49, 64 * 64, 64 * 128, 256 * 64, 64 * 256,              // stage 4 MGC
      64 * 128, 128 * 10};                                          // head
  const std::size_t total = std::accumulate(layers.begin(), layers.end(), std::size_t{0});
  CHECK(total == 433600);
  auto m = Model<float>::build(toy_config(), 0);
  CHECK(m.count_macs(32) == total);
  CHECK(count_macs_analytic(toy_config(), 32) == total);
  CHECK_THROWS(m.count_macs(48));
}

TEST_CASE("single 1x1 conv MACs") {
  Rng rng(3);
  const auto cb = ConvBn<float>::make(rng, 12, 12, 1);
  CHECK(cb.macs(7, 9) == 7 * 9 * 12 * 12);
}

TEST_CASE("parameter accounting") {
  std::vector<ModelConfig> configs{toy_config(), synth_config(), local_config()};
  for (const auto& name : preset_names()) configs.push_back(preset(name));
  for (auto c : configs) {
    for (auto variant : {GraphVariant::mgc, GraphVariant::svga}) {
      c.graph_variant = variant;
      CAPTURE(c.name);
      auto m = Model<float>::build(c, 0);
      CHECK(m.count_params() == count_params_analytic(c));
      CHECK(m.count_macs(c.input_resolution) == count_macs_analytic(c, c.input_resolution));
    }
  }
}

TEST_CASE("SVGA and MGC give equal counts; CPE costs C x 49 per block") {
  auto c = toy_config();
  auto mgc = Model<float>::build(c, 0);
  c.graph_variant = GraphVariant::svga;
  auto svga = Model<float>::build(c, 0);
  CHECK(mgc.count_params() == svga.count_params());
  c.cpe_enabled = false;
  auto no_cpe = Model<float>::build(c, 0);
  CHECK(mgc.count_params() - no_cpe.count_params() == 49 * (16 + 32 + 64));
}

TEST_CASE("presets are near the published sizes") {
  auto ti = Model<float>::build(preset("ti"), 0);
  auto b = Model<float>::build(preset("b"), 0);
  const double ti_m = static_cast<double>(ti.count_params()) / 1e6;
  const double b_m = static_cast<double>(b.count_params()) / 1e6;
  CHECK(std::abs(ti_m - 5.6) / 5.6 <= 0.15);
  CHECK(std::abs(b_m - 27.7) / 27.7 <= 0.15);
  const double ti_g = static_cast<double>(ti.count_macs(224)) / 1e9;
  CHECK(std::abs(ti_g - 0.6) / 0.6 <= 0.25);
  CHECK(published_size("s").params_m == 7.7);
  CHECK_THROWS_AS(published_size("xl"), ConfigError);
}

TEST_CASE("determinism and registry") {
  auto a = Model<float>::build(toy_config(), 7);
  auto b = Model<float>::build(toy_config(), 7);
  auto c = Model<float>::build(toy_config(), 8);
  CHECK(flat_parameters(a) == flat_parameters(b));
  CHECK(flat_parameters(a) != flat_parameters(c));
  std::set<std::string> names;
  for (auto& t : a.named_tensors()) CHECK(names.insert(t.name).second);
  CHECK(names.count("stem.conv1.weight") == 1);
  CHECK(names.count("stage2.mgc0.cpe.kernel") == 1);

  Rng rng(9);
  const auto x = rng.uniform_tensor<float>({4, 3, 32, 32}, -1, 1);
  Tape<float> t1(false), t2(false);
  a.set_mode(Mode::eval);
  b.set_mode(Mode::eval);
  const auto ya = a.forward(t1, x);
  const auto yb = b.forward(t2, x);
  CHECK(std::vector<float>(ya.data().begin(), ya.data().end()) == std::vector<float>(yb.data().begin(), yb.data().end()));
}

TEST_CASE("identical images give identical logits") {
  auto m = Model<float>::build(toy_config(), 3);
  m.set_mode(Mode::eval);
  Rng rng(4);
  const auto one = rng.uniform_tensor<float>({1, 3, 32, 32}, -1, 1);
  Tensor<float> batch({3, 3, 32, 32});
  for (std::size_t n = 0; n < 3; ++n) std::copy(one.data().begin(), one.data().end(), batch.data().begin() + n * one.numel());
  Tape<float> tape(false);
  const auto y = m.forward(tape, batch);
  for (std::size_t k = 0; k < 10; ++k) {
    CHECK(y.at(0, k, 0, 0) == y.at(1, k, 0, 0));
    CHECK(y.at(0, k, 0, 0) == y.at(2, k, 0, 0));
  }
}

TEST_CASE("untrained entropy is near ln 10") {
  auto m = Model<double>::build(toy_config(), 5);
  m.set_mode(Mode::eval);
  Rng rng(6);
  Tape<double> tape(false);
  const auto y = m.forward(tape, rng.uniform_tensor<double>({32, 3, 32, 32}, -1, 1));
  double mean_entropy = 0;
  for (std::size_t n = 0; n < 32; ++n) {
    double mx = -1e300, z = 0, h = 0;
    for (std::size_t k = 0; k < 10; ++k) mx = std::max(mx, y.at(n, k, 0, 0));
    for (std::size_t k = 0; k < 10; ++k) z += std::exp(y.at(n, k, 0, 0) - mx);
    for (std::size_t k = 0; k < 10; ++k) {
      const double p = std::exp(y.at(n, k, 0, 0) - mx) / z;
      h -= p * std::log(p);
    }
    mean_entropy += h / 32;
  }
  CHECK(mean_entropy > 0.9 * std::log(10.0));
}

TEST_CASE("merge and fold") {
  auto m = Model<double>::build(synth_config(), 11);
  Rng rng(12);
  {
    Tape<double> tape(false);
    for (int k = 0; k < 3; ++k) m.forward(tape, rng.uniform_tensor<double>({8, 3, 32, 32}, -1, 1));
  }
  m.set_mode(Mode::eval);
  const auto x = rng.uniform_tensor<double>({4, 3, 32, 32}, -1, 1);
  Tape<double> tape(false);
  const auto base = m.forward(tape, x);
  m.merge_cpe();
  CHECK(m.cpe_merged());
  CHECK(max_abs_diff(base, m.forward(tape, x)) < 1e-12);
  CHECK_THROWS_AS(m.merge_cpe(), std::logic_error);
  m.fold_norms();
  CHECK(max_abs_diff(base, m.forward(tape, x)) < 1e-10);
  CHECK_THROWS_AS(m.fold_norms(), std::logic_error);
}

TEST_CASE("config validation") {
  auto c = toy_config();
  c.mgc_counts[0] = 1;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("mgc_counts"), ConfigError);
  c = toy_config();
  c.stage_channels = {16, 8, 32, 64};
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("stage_channels"), ConfigError);
  c = synth_config();
  c.mgc_distances = {2, 2, 2};
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("mgc_distances"), ConfigError);
  c.mgc_distances = {1, 0, 1};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = toy_config();
  c.input_resolution = 40;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(Model<float>::build(c, 0), ConfigError);
}

TEST_CASE("config JSON") {
  for (const auto& c : {toy_config(), synth_config(), local_config(), preset("ti"), preset("b")}) {
    CHECK(config_from_json(config_to_json(c)) == c);
  }
  CHECK_THROWS_AS(config_from_json(R"({"name": "x", "bogus": 1})"), ConfigError);
  CHECK_THROWS_AS(config_from_json("{not json"), ConfigError);
  CHECK(default_distance(7) == 2);
  CHECK(default_distance(2) == 1);
}

TEST_CASE("config files mirror the built-in configs") {
  const std::string dir = MGCKIT_CONFIG_DIR;
  CHECK(load_config(dir + "/toy.json") == toy_config());
  CHECK(load_config(dir + "/synth.json") == synth_config());
  CHECK(load_config(dir + "/synth-local.json") == local_config());
  for (const auto& name : preset_names()) CHECK(load_config(dir + "/" + name + ".json") == preset(name));
  CHECK(!slurp(dir + "/ti.json").empty());
}
