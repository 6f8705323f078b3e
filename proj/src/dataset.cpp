#include "mgc/dataset.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>
#include <stdexcept>

#include "mgc/container.hpp"
#include "mgc/random.hpp"

namespace mgc {

namespace {

constexpr std::size_t kCell = 4;
constexpr std::size_t kMarker = 3;
constexpr double kNoise = 0.25;
constexpr float kMarkerValue = 1.0F;

int relation(long ay, long ax, long by, long bx, std::size_t classes) {
  const int right = bx > ax ? 1 : 0;
  if (classes == 2) return right;
  return 2 * (by > ay ? 1 : 0) + right;
}

}  // namespace

void SynthTaskSpec::validate() const {
  if (resolution < 16 || resolution % kCell != 0) {
    throw std::invalid_argument("synthetic task: resolution " + std::to_string(resolution) +
                                " must be a multiple of 4 and at least 16");
  }
  if (num_classes != 2 && num_classes != 4) {
    throw std::invalid_argument("synthetic task: num_classes must be 2 or 4, got " + std::to_string(num_classes));
  }
  if (samples == 0) throw std::invalid_argument("synthetic task: samples must be positive");
}

Dataset generate_dataset(const SynthTaskSpec& spec) {
  spec.validate();
  const std::size_t r = spec.resolution;
  const long cells = static_cast<long>(r / kCell);
  const std::size_t plane = r * r;
  Dataset d;
  d.image_shape = Shape{1, 3, r, r};
  d.num_classes = spec.num_classes;
  d.images.resize(spec.samples * 3 * plane);
  d.labels.resize(spec.samples);

  Rng rng(spec.seed);
  std::vector<int> targets(spec.samples);
  for (std::size_t i = 0; i < spec.samples; ++i) targets[i] = static_cast<int>(i % spec.num_classes);
  for (std::size_t i = spec.samples; i > 1; --i) {
    std::swap(targets[i - 1], targets[static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(i) - 1))]);
  }

  for (std::size_t s = 0; s < spec.samples; ++s) {
    float* img = d.images.data() + s * 3 * plane;
    for (std::size_t k = 0; k < 3 * plane; ++k) img[k] = static_cast<float>(rng.uniform(-kNoise, kNoise));
    long ay = 0, ax = 0, by = 0, bx = 0;
    std::array<long, 4> jitter{};
    for (;;) {
      ay = rng.uniform_int(0, cells - 1);
      ax = rng.uniform_int(0, cells - 1);
      by = rng.uniform_int(0, cells - 1);
      bx = rng.uniform_int(0, cells - 1);
      for (long& j : jitter) j = rng.uniform_int(0, 1);
      if (ay == by || ax == bx) continue;
      const long kc = static_cast<long>(kCell);
      const long dy = std::labs((by * kc + jitter[2]) - (ay * kc + jitter[0]));
      const long dx = std::labs((bx * kc + jitter[3]) - (ax * kc + jitter[1]));
      if (2 * std::max(dy, dx) < static_cast<long>(r)) continue;
      if (relation(ay, ax, by, bx, spec.num_classes) == targets[s]) break;
    }
    auto stamp = [&](std::size_t channel, long y0, long x0) {
      for (std::size_t y = static_cast<std::size_t>(y0); y < static_cast<std::size_t>(y0) + kMarker; ++y) {
        for (std::size_t x = static_cast<std::size_t>(x0); x < static_cast<std::size_t>(x0) + kMarker; ++x) {
          img[channel * plane + y * r + x] += kMarkerValue;
        }
      }
    };
    const long kc = static_cast<long>(kCell);
    stamp(0, ay * kc + jitter[0], ax * kc + jitter[1]);
    stamp(1, by * kc + jitter[2], bx * kc + jitter[3]);
    d.labels[s] = targets[s];
  }
  return d;
}

template <typename T>
Tensor<T> Dataset::batch(std::span<const std::size_t> indices) const {
  const std::size_t per = image_shape.numel();
  Tensor<T> out(Shape{indices.size(), image_shape.c, image_shape.h, image_shape.w});
  auto o = out.data();
  for (std::size_t b = 0; b < indices.size(); ++b) {
    if (indices[b] >= size()) {
      throw std::out_of_range("dataset index " + std::to_string(indices[b]) + " >= " + std::to_string(size()));
    }
    const float* src = images.data() + indices[b] * per;
    for (std::size_t k = 0; k < per; ++k) o[b * per + k] = static_cast<T>(src[k]);
  }
  return out;
}

template Tensor<float> Dataset::batch<float>(std::span<const std::size_t>) const;
template Tensor<double> Dataset::batch<double>(std::span<const std::size_t>) const;

std::vector<int> Dataset::batch_labels(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(labels.at(i));
  return out;
}

Dataset Dataset::head(std::size_t n) const {
  n = std::min(n, size());
  Dataset d;
  d.image_shape = image_shape;
  d.num_classes = num_classes;
  d.images.assign(images.begin(), images.begin() + static_cast<std::ptrdiff_t>(n * image_shape.numel()));
  d.labels.assign(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n));
  return d;
}

void save_dataset(const Dataset& data, const std::string& path) {
  Entry images;
  images.name = "images";
  images.dtype = DType::f32;
  images.shape = Shape{data.size(), data.image_shape.c, data.image_shape.h, data.image_shape.w};
  images.f32 = data.images;
  Entry labels;
  labels.name = "labels";
  labels.dtype = DType::i32;
  labels.shape = Shape{data.size(), 1, 1, 1};
  labels.i32.assign(data.labels.begin(), data.labels.end());
  Entry classes;
  classes.name = "num_classes";
  classes.dtype = DType::i32;
  classes.shape = Shape{1, 1, 1, 1};
  classes.i32 = {static_cast<std::int32_t>(data.num_classes)};
  write_container(path, kDatasetMagic, {images, labels, classes});
}

Dataset load_dataset(const std::string& path) {
  const auto entries = read_container(path, kDatasetMagic);
  const char* expected[] = {"images", "labels", "num_classes"};
  const DType types[] = {DType::f32, DType::i32, DType::i32};
  if (entries.size() != 3) {
    throw FormatError("dataset cache has " + std::to_string(entries.size()) + " entries, expected 3");
  }
  for (std::size_t i = 0; i < 3; ++i) {
    if (entries[i].name != expected[i] || entries[i].dtype != types[i]) {
      throw FormatError("dataset cache entry " + std::to_string(i) + " is '" + entries[i].name + "' (" +
                        dtype_name(entries[i].dtype) + "), expected '" + expected[i] + "' (" + dtype_name(types[i]) +
                        ")");
    }
  }
  const Shape s = entries[0].shape;
  if (entries[1].shape != Shape{s.n, 1, 1, 1} || entries[2].shape != Shape{1, 1, 1, 1}) {
    throw FormatError("dataset cache: label shape " + entries[1].shape.str() + " does not match images " + s.str());
  }
  Dataset d;
  d.image_shape = Shape{1, s.c, s.h, s.w};
  d.num_classes = static_cast<std::size_t>(entries[2].i32[0]);
  d.images = entries[0].f32;
  d.labels.assign(entries[1].i32.begin(), entries[1].i32.end());
  for (int l : d.labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= d.num_classes) {
      throw FormatError("dataset cache: label " + std::to_string(l) + " outside [0, " +
                        std::to_string(d.num_classes) + ")");
    }
  }
  return d;
}

std::vector<std::size_t> class_histogram(const Dataset& data) {
  std::vector<std::size_t> h(data.num_classes, 0);
  for (int l : data.labels) ++h.at(static_cast<std::size_t>(l));
  return h;
}

}  // namespace mgc
