#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mgc/blocks.hpp"
#include "mgc/config.hpp"

namespace mgc {

template <typename T>
struct Stage {
  std::optional<DownsampleParams<T>> down;  // absent for stage 1
  std::vector<InvertedResidualParams<T>> inverted;
  std::vector<MgcBlockParams<T>> graph_blocks;
  std::optional<GraphPattern> pattern;  // built when graph_blocks is non-empty
};

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
  TensorKind kind;
};

/// The four-stage network:
///   stem, [N1 IR], down, [N2 IR, M2 MGC], down, [N3 IR, M3 MGC],
///   down, [N4 IR, M4 MGC], head.
///
/// Parameters are initialised deterministically from the seed; the same
/// config and seed give bit-identical tensors.
template <typename T>
class Model {
 public:
  /// Throws ConfigError if the config is invalid.
  static Model build(const ModelConfig& config, std::uint64_t seed);

  /// (n, 3, R, R) -> (n, classes, 1, 1) with R = config.input_resolution.
  Tensor<T> forward(Tape<T>& tape, const Tensor<T>& batch);

  const ModelConfig& config() const { return config_; }
  Mode mode() const { return mode_; }
  void set_mode(Mode m) { mode_ = m; }

  void visit(const TensorVisitor<T>& f);
  std::vector<NamedTensor<T>> named_tensors();
  std::vector<NamedTensor<T>> parameters();
  void zero_grad();

  /// Moves every CPE residual link into its kernel (inference only).
  void merge_cpe();
  bool cpe_merged() const { return cpe_merged_; }
  /// Absorbs every eval-mode norm into the preceding conv (inference only).
  void fold_norms();
  bool norms_folded() const { return folded_; }

  std::size_t count_params();
  /// Multiply-accumulates of every conv and linear layer at `resolution`.
  /// Shifts and max are memory operations and count zero.
  std::size_t count_macs(std::size_t resolution) const;

  const StemParams<T>& stem() const { return stem_; }
  const std::array<Stage<T>, kStages>& stages() const { return stages_; }
  std::array<Stage<T>, kStages>& stages() { return stages_; }
  HeadParams<T>& head() { return head_; }

 private:
  ModelConfig config_;
  StemParams<T> stem_;
  std::array<Stage<T>, kStages> stages_;
  HeadParams<T> head_;
  Mode mode_ = Mode::train;
  bool cpe_merged_ = false;
  bool folded_ = false;
};

}  // namespace mgc
