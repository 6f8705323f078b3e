#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "mgc/graph.hpp"

namespace mgc {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr std::size_t kStages = 4;
inline constexpr std::size_t kImageChannels = 3;

/// Network shape. Stage i runs N_i inverted residuals then M_i MGC blocks at
/// resolution input/2^(i+2). Stage 1 has no graph blocks.
struct ModelConfig {
  std::string name = "custom";
  std::array<std::size_t, kStages> stage_channels{};
  std::array<std::size_t, kStages> inverted_counts{};
  std::array<std::size_t, kStages> mgc_counts{};
  /// L for stages 2..4. Empty means the default max(1, round(extent / 4)).
  std::vector<int> mgc_distances;
  std::size_t cpe_kernel = 7;
  std::size_t expansion = 4;
  std::size_t num_classes = 1000;
  std::size_t input_resolution = 224;
  GraphVariant graph_variant = GraphVariant::mgc;
  /// K used when graph_variant is SVGA.
  int svga_k = 2;
  bool cpe_enabled = true;
  /// Stem, stage-1 inverted residuals and head only: no downsampling past
  /// the stem and no graph blocks. Used as the local-receptive-field control.
  bool local_only = false;

  /// Throws ConfigError naming the first violated field.
  void validate() const;

  std::size_t stage_extent(std::size_t stage) const { return input_resolution >> (stage + 2); }
  /// Resolved L for a stage (0-based; stage 0 has no graph).
  int distance(std::size_t stage) const;
  GraphSpec graph_spec(std::size_t stage) const;
  std::size_t head_hidden() const { return 2 * stage_channels[local_only ? 0 : kStages - 1]; }
  std::size_t active_stages() const { return local_only ? 1 : kStages; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Default MGC distance for a stage of the given spatial extent.
int default_distance(std::size_t extent);

ModelConfig config_from_json(const std::string& text);
std::string config_to_json(const ModelConfig& config);
ModelConfig load_config(const std::string& path);

/// Reconstructed size presets "ti", "s", "m", "b" at 224x224 with 1000
/// classes. Widths and depths are chosen to approximate published totals;
/// they are not published values.
ModelConfig preset(const std::string& name);
std::vector<std::string> preset_names();

/// Published totals for a preset size (millions of parameters, GMACs).
struct PublishedSize {
  double params_m = 0;
  double gmacs = 0;
};
/// Throws ConfigError for names other than ti, s, m, b.
PublishedSize published_size(const std::string& name);

/// Small 10-class config used by unit tests.
ModelConfig toy_config();
/// 4-class config at 32x32 for the synthetic relative-position task, with
/// graph blocks in stages 2-4.
ModelConfig synth_config();
/// synth_config() reduced to stem, stage-1 inverted residuals and head.
ModelConfig local_config();

/// Closed-form learnable-scalar count (running statistics excluded).
std::size_t count_params_analytic(const ModelConfig& config);
/// Closed-form multiply-accumulate count at `resolution`.
std::size_t count_macs_analytic(const ModelConfig& config, std::size_t resolution);

}  // namespace mgc
