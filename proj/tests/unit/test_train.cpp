#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "mgc/checkpoint.hpp"
#include "mgc/train.hpp"

using namespace mgc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "mgckit_unit";
  fs::create_directories(dir);
  return dir / name;
}

template <typename T>
std::vector<T> flat(Model<T>& m) {
  std::vector<T> out;
  for (auto& p : m.named_tensors()) out.insert(out.end(), p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

// Marker centres recovered from the image: the 3x3 block whose channel sum is largest.
std::pair<std::size_t, std::size_t> marker(const Dataset& d, std::size_t n, std::size_t channel) {
  const std::size_t r = d.image_shape.h;
  const float* img = d.images.data() + n * 3 * r * r + channel * r * r;
  double best = -1e9;
  std::pair<std::size_t, std::size_t> at{0, 0};
  for (std::size_t i = 1; i + 1 < r; ++i)
    for (std::size_t j = 1; j + 1 < r; ++j) {
      double s = 0;
      for (int di = -1; di <= 1; ++di)
        for (int dj = -1; dj <= 1; ++dj) s += img[(i + di) * r + (j + dj)];
      if (s > best) {
        best = s;
        at = {i, j};
      }
    }
  return at;
}

}  // namespace

TEST_CASE("dataset determinism, balance and label rule") {
  const SynthTaskSpec spec{32, 4, 402, 77};
  const Dataset a = generate_dataset(spec);
  const Dataset b = generate_dataset(spec);
  CHECK(a == b);
  CHECK(a.size() == 402);
  const auto hist = class_histogram(a);
  const auto [lo, hi] = std::minmax_element(hist.begin(), hist.end());
  CHECK(*hi - *lo <= 1);
  CHECK(generate_dataset({32, 4, 402, 78}).images != a.images);

  for (std::size_t n = 0; n < 60; ++n) {
    const auto ma = marker(a, n, 0);
    const auto mb = marker(a, n, 1);
    const int below = mb.first > ma.first ? 1 : 0;
    const int right = mb.second > ma.second ? 1 : 0;
    CHECK(a.labels[n] == 2 * below + right);
    const std::size_t dy = ma.first > mb.first ? ma.first - mb.first : mb.first - ma.first;
    const std::size_t dx = ma.second > mb.second ? ma.second - mb.second : mb.second - ma.second;
    CHECK(std::max(dy, dx) >= 16);
  }
  CHECK_THROWS(generate_dataset({32, 3, 10, 0}));
}

TEST_CASE("dataset cache round trip and batching") {
  const Dataset d = generate_dataset({32, 2, 20, 5});
  const auto path = scratch("d.mvgd").string();
  save_dataset(d, path);
  CHECK(load_dataset(path) == d);
  const std::vector<std::size_t> idx{3, 0};
  const auto x = d.batch<float>(idx);
  CHECK(x.shape() == Shape{2, 3, 32, 32});
  CHECK(x.at(1, 2, 5, 6) == d.images[2 * 32 * 32 + 5 * 32 + 6]);
  CHECK(d.batch_labels(idx) == std::vector<int>{d.labels[3], d.labels[0]});
  CHECK_THROWS_AS(load_checkpoint<float>(path, toy_config()), FormatError);
}

TEST_CASE("cosine schedule") {
  CHECK(cosine_lr(2e-3, 0, 100) == 2e-3);
  CHECK(cosine_lr(2e-3, 100, 100) == 0.0);
  CHECK(cosine_lr(2e-3, 50, 100) == doctest::Approx(1e-3).epsilon(1e-12));
  for (std::size_t s = 0; s < 100; ++s) CHECK(cosine_lr(1.0, s + 1, 100) <= cosine_lr(1.0, s, 100));
}

TEST_CASE("AdamW") {
  auto m = Model<double>::build(toy_config(), 1);
  SUBCASE("zero learning rate leaves parameters unchanged") {
    const auto before = flat(m);
    AdamW<double> opt(m.parameters(), {0.0, 0.9, 0.999, 1e-8, 0.05, 10});
    const Dataset d = generate_dataset({32, 4, 8, 1});
    const std::vector<std::size_t> idx{0, 1, 2, 3, 4, 5, 6, 7};
    const auto x = d.batch<double>(idx);
    const auto labels = d.batch_labels(idx);
    // toy has 10 classes; labels < 4 are still valid
    train_step(m, x, labels, opt);
    const auto after = flat(m);
    const auto params = m.parameters();
    std::size_t offset = 0;
    for (auto& t : m.named_tensors()) {
      if (t.kind == TensorKind::parameter) {
        for (std::size_t i = 0; i < t.tensor.numel(); ++i) CHECK(after[offset + i] == before[offset + i]);
      }
      offset += t.tensor.numel();
    }
  }
  SUBCASE("zero gradient decays by lr * wd * w") {
    const double lr = 1e-2, wd = 0.1;
    AdamW<double> opt(m.parameters(), {lr, 0.9, 0.999, 1e-8, wd, 1000000});
    auto p = m.parameters().front().tensor;
    const auto before = p.clone();
    const double lr_now = opt.current_lr();
    m.zero_grad();
    p.ensure_grad();
    opt.step();
    for (std::size_t i = 0; i < p.numel(); ++i) {
      CHECK(p.data()[i] == doctest::Approx(before.data()[i] - lr_now * wd * before.data()[i]).epsilon(1e-15));
    }
    CHECK(opt.step_count() == 1);
    CHECK(opt.first_moments().front().shape() == p.shape());
  }
}

TEST_CASE("train_step requires train mode and reports non-finite ops") {
  auto m = Model<double>::build(toy_config(), 2);
  AdamW<double> opt(m.parameters(), {});
  const std::vector<int> labels{0, 1};
  m.set_mode(Mode::eval);
  CHECK_THROWS_AS(train_step(m, Tensor<double>({2, 3, 32, 32}), labels, opt), std::logic_error);
  m.set_mode(Mode::train);
  Tensor<double> bad({2, 3, 32, 32});
  bad.at(0, 0, 0, 0) = std::nan("");
  CHECK_THROWS_AS(train_step(m, bad, labels, opt), NonFiniteError);
}

TEST_CASE("first step lowers the loss in most seeded trials") {
  const Dataset d = generate_dataset({32, 4, 16, 3});
  std::vector<std::size_t> idx(16);
  std::iota(idx.begin(), idx.end(), 0);
  const auto x = d.batch<double>(idx);
  const auto labels = d.batch_labels(idx);
  int improved = 0;
  const int trials = 10;
  for (int seed = 0; seed < trials; ++seed) {
    auto m = Model<double>::build(toy_config(), static_cast<std::uint64_t>(seed));
    AdamW<double> opt(m.parameters(), {1e-3, 0.9, 0.999, 1e-8, 0.05, 1000});
    const double l0 = train_step(m, x, labels, opt).loss;
    const double l1 = train_step(m, x, labels, opt).loss;
    improved += l1 < l0 ? 1 : 0;
  }
  CHECK(improved >= 9);
}

TEST_CASE("overfits 32 samples") {
  const Dataset d = generate_dataset({32, 4, 32, 4});
  std::vector<std::size_t> idx(32);
  std::iota(idx.begin(), idx.end(), 0);
  const auto x = d.batch<float>(idx);
  const auto labels = d.batch_labels(idx);
  auto m = Model<float>::build(synth_config(), 5);
  AdamW<float> opt(m.parameters(), {2e-3, 0.9, 0.999, 1e-8, 0.0, 200});
  StepResult last;
  for (int s = 0; s < 200; ++s) last = train_step(m, x, labels, opt);
  CHECK(last.correct == 32);
}

TEST_CASE("evaluation") {
  auto m = Model<float>::build(synth_config(), 6);
  const Dataset d = generate_dataset({32, 4, 1000, 9});
  const double acc = evaluate(m, d);
  CHECK(std::abs(acc - 0.25) <= 0.05);
  CHECK(m.mode() == Mode::train);
  CHECK(evaluate(m, d) == acc);
  CHECK_THROWS_AS(evaluate(m, Dataset{}), std::invalid_argument);
}

TEST_CASE("training is reproducible in double") {
  const Dataset tr = generate_dataset({32, 4, 64, 1});
  const Dataset te = generate_dataset({32, 4, 32, 2});
  const TrainConfig cfg{2, 16, 2e-3, 0.05, 3};
  auto a = Model<double>::build(synth_config(), 4);
  auto b = Model<double>::build(synth_config(), 4);
  const auto ra = train(a, tr, te, cfg);
  const auto rb = train(b, tr, te, cfg);
  CHECK(ra.step_losses.size() == 8);
  CHECK(ra.step_losses == rb.step_losses);
  CHECK(ra.log == rb.log);
  CHECK(ra.log.size() == 2);
  CHECK(log_from_table(csv::parse(csv::emit(log_to_table(ra.log)))) == ra.log);
}

TEST_CASE("checkpoint round trip and errors") {
  auto m = Model<float>::build(synth_config(), 8);
  {
    Tape<float> tape(false);
    Rng rng(1);
    m.forward(tape, rng.uniform_tensor<float>({4, 3, 32, 32}, -1, 1));
  }
  const auto path = scratch("m.mvg2").string();
  save_checkpoint(m, path);
  auto back = load_checkpoint<float>(path, synth_config());
  CHECK(flat(back) == flat(m));
  m.set_mode(Mode::eval);
  back.set_mode(Mode::eval);
  Rng rng(2);
  const auto x = rng.uniform_tensor<float>({2, 3, 32, 32}, -1, 1);
  Tape<float> t1(false), t2(false);
  const auto ya = m.forward(t1, x);
  const auto yb = back.forward(t2, x);
  CHECK(max_abs_diff(ya, yb) == 0.0f);

  SUBCASE("truncated file") {
    std::string bytes = csv::read_file(path);
    bytes.resize(bytes.size() / 2);
    const auto cut = scratch("cut.mvg2").string();
    csv::write_file(cut, bytes);
    CHECK_THROWS_WITH_AS(load_checkpoint<float>(cut, synth_config()), doctest::Contains("truncat"), FormatError);
  }
  SUBCASE("bad magic") {
    std::string bytes = csv::read_file(path);
    bytes[0] = 'X';
    const auto bad = scratch("bad.mvg2").string();
    csv::write_file(bad, bytes);
    CHECK_THROWS_AS(load_checkpoint<float>(bad, synth_config()), FormatError);
  }
  SUBCASE("ti checkpoint into s config names the entry") {
    auto ti = Model<float>::build(preset("ti"), 0);
    const auto p = scratch("ti.mvg2").string();
    save_checkpoint(ti, p);
    CHECK_THROWS_WITH_AS(load_checkpoint<float>(p, preset("s")), doctest::Contains("stem"), FormatError);
  }
  SUBCASE("folded models are refused") {
    m.fold_norms();
    CHECK_THROWS(save_checkpoint(m, scratch("f.mvg2").string()));
  }
}

TEST_CASE("container encoding") {
  std::vector<Entry> entries;
  Tensor<double> t({1, 2, 1, 3}, {1.5, -0.0, 3e-300, 7, 8, 9});
  entries.push_back(Entry::from_tensor("a", t));
  entries.push_back(Entry::from_tensor("b", Tensor<std::int32_t>({1, 1, 1, 2}, {-4, 5})));
  const std::string bytes = encode_container(kCheckpointMagic, entries);
  CHECK(bytes.substr(0, 4) == "MVG2");
  CHECK(static_cast<unsigned char>(bytes[4]) == 1);
  CHECK(decode_container(kCheckpointMagic, bytes) == entries);
  CHECK(max_abs_diff(decode_container(kCheckpointMagic, bytes)[0].to_tensor<double>(), t) == 0.0);
  CHECK_THROWS_AS(decode_container(kDatasetMagic, bytes), FormatError);
  CHECK_THROWS_AS(decode_container(kCheckpointMagic, bytes + "x"), FormatError);
  std::string wrong_version = bytes;
  wrong_version[4] = 2;
  CHECK_THROWS_WITH_AS(decode_container(kCheckpointMagic, wrong_version), doctest::Contains("version"), FormatError);
}

TEST_CASE("csv tables") {
  csv::Table t{{"note"}, {"a", "b"}, {{"1", "x"}, {"2.5", "y"}}};
  CHECK(csv::parse(csv::emit(t)) == t);
  CHECK_THROWS(csv::emit(csv::Table{{}, {"a"}, {{"has,comma"}}}));
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17}) CHECK(csv::parse_double(csv::format_double(v)) == v);
  CHECK(csv::column(t, "b") == 1);
  CHECK_THROWS(csv::column(t, "c"));
}
