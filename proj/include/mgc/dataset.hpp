#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mgc/tensor.hpp"

namespace mgc {

/// Relative-position task: two 3x3 markers (A in channel 0, B in channel 1)
/// sit on a noise texture. With 4 classes the label is
/// 2 * [B below A] + [B right of A]; with 2 classes it is [B right of A].
/// The markers are at least resolution/2 apart along one axis.
struct SynthTaskSpec {
  std::size_t resolution = 32;
  std::size_t num_classes = 4;
  std::size_t samples = 1024;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument.
  void validate() const;
  friend bool operator==(const SynthTaskSpec&, const SynthTaskSpec&) = default;
};

struct Dataset {
  Shape image_shape;  // (1, 3, R, R)
  std::size_t num_classes = 0;
  std::vector<float> images;  // samples x 3 x R x R
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  /// Copies the listed samples into a batch tensor.
  template <typename T>
  Tensor<T> batch(std::span<const std::size_t> indices) const;
  std::vector<int> batch_labels(std::span<const std::size_t> indices) const;
  /// First `n` samples.
  Dataset head(std::size_t n) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

Dataset generate_dataset(const SynthTaskSpec& spec);

/// Binary cache with magic "MVGD": entries "images" (f32) and "labels" (i32).
void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path);

/// Samples per class.
std::vector<std::size_t> class_histogram(const Dataset& data);

}  // namespace mgc
