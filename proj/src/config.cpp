#include "mgc/config.hpp"

#include <cmath>
#include <set>

#include "json.hpp"
#include "mgc/csv.hpp"

namespace mgc {

using nlohmann::json;

int default_distance(std::size_t extent) {
  return std::max(1, static_cast<int>(std::lround(static_cast<double>(extent) / 4.0)));
}

int ModelConfig::distance(std::size_t stage) const {
  if (stage == 0 || stage >= kStages) {
    throw ConfigError("distance: stage index " + std::to_string(stage) + " has no graph blocks");
  }
  return mgc_distances.empty() ? default_distance(stage_extent(stage)) : mgc_distances[stage - 1];
}

GraphSpec ModelConfig::graph_spec(std::size_t stage) const {
  if (graph_variant == GraphVariant::svga) return {GraphVariant::svga, svga_k};
  return {GraphVariant::mgc, distance(stage)};
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError("invalid config field '" + field + "': " + why);
  };
  for (std::size_t i = 0; i < kStages; ++i) {
    if (stage_channels[i] == 0) fail("stage_channels", "stage " + std::to_string(i + 1) + " has zero channels");
    if (i > 0 && stage_channels[i] < stage_channels[i - 1]) fail("stage_channels", "widths must be non-decreasing");
  }
  if (mgc_counts[0] != 0) fail("mgc_counts", "stage 1 uses only inverted residuals, M1 must be 0");
  if (input_resolution == 0 || input_resolution % 32 != 0) {
    fail("input_resolution", std::to_string(input_resolution) + " is not a positive multiple of 32");
  }
  if (!mgc_distances.empty()) {
    if (mgc_distances.size() != kStages - 1) {
      fail("mgc_distances", "expected 3 entries (stages 2-4), got " + std::to_string(mgc_distances.size()));
    }
    for (std::size_t i = 1; i < kStages; ++i) {
      const int l = mgc_distances[i - 1];
      const std::size_t extent = stage_extent(i);
      if (l < 1) fail("mgc_distances", "L must be positive, got " + std::to_string(l));
      if (extent > 1 && static_cast<std::size_t>(l) >= extent) {
        fail("mgc_distances", "L=" + std::to_string(l) + " for stage " + std::to_string(i + 1) +
                                  " is not below its spatial extent " + std::to_string(extent));
      }
    }
  }
  if (cpe_kernel % 2 == 0) fail("cpe_kernel", "must be odd, got " + std::to_string(cpe_kernel));
  if (expansion == 0) fail("expansion", "must be positive");
  if (num_classes < 2) fail("num_classes", "need at least 2 classes");
  if (svga_k < 1) fail("svga_k", "must be positive");
  if (local_only) {
    for (std::size_t m : mgc_counts) {
      if (m != 0) fail("mgc_counts", "local_only models have no graph blocks");
    }
  }
}

namespace {

const std::set<std::string> kKeys = {"name",        "stage_channels", "inverted_counts",  "mgc_counts",
                                     "mgc_distances", "cpe_kernel",   "expansion",        "num_classes",
                                     "input_resolution", "graph_variant", "svga_k",       "cpe_enabled",
                                     "local_only"};
const std::set<std::string> kRequired = {"stage_channels", "inverted_counts", "mgc_counts", "num_classes",
                                         "input_resolution"};

template <typename V>
V get(const json& j, const char* key) {
  try {
    return j.at(key).get<V>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config field '") + key + "': " + e.what());
  }
}

std::array<std::size_t, kStages> get_stages(const json& j, const char* key) {
  const auto v = get<std::vector<long long>>(j, key);
  if (v.size() != kStages) {
    throw ConfigError(std::string("invalid config field '") + key + "': expected 4 entries, got " +
                      std::to_string(v.size()));
  }
  std::array<std::size_t, kStages> out{};
  for (std::size_t i = 0; i < kStages; ++i) {
    if (v[i] < 0) throw ConfigError(std::string("invalid config field '") + key + "': negative entry");
    out[i] = static_cast<std::size_t>(v[i]);
  }
  return out;
}

}  // namespace

ModelConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!kKeys.count(key)) throw ConfigError("unknown config field '" + key + "'");
  }
  for (const auto& key : kRequired) {
    if (!j.contains(key)) throw ConfigError("missing config field '" + key + "'");
  }
  ModelConfig c;
  if (j.contains("name")) c.name = get<std::string>(j, "name");
  c.stage_channels = get_stages(j, "stage_channels");
  c.inverted_counts = get_stages(j, "inverted_counts");
  c.mgc_counts = get_stages(j, "mgc_counts");
  if (j.contains("mgc_distances") && !j["mgc_distances"].is_null()) {
    c.mgc_distances = get<std::vector<int>>(j, "mgc_distances");
  }
  if (j.contains("cpe_kernel")) c.cpe_kernel = get<std::size_t>(j, "cpe_kernel");
  if (j.contains("expansion")) c.expansion = get<std::size_t>(j, "expansion");
  c.num_classes = get<std::size_t>(j, "num_classes");
  c.input_resolution = get<std::size_t>(j, "input_resolution");
  if (j.contains("graph_variant")) {
    try {
      c.graph_variant = parse_variant(get<std::string>(j, "graph_variant"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("invalid config field 'graph_variant': ") + e.what());
    }
  }
  if (j.contains("svga_k")) c.svga_k = get<int>(j, "svga_k");
  if (j.contains("cpe_enabled")) c.cpe_enabled = get<bool>(j, "cpe_enabled");
  if (j.contains("local_only")) c.local_only = get<bool>(j, "local_only");
  c.validate();
  return c;
}

std::string config_to_json(const ModelConfig& c) {
  json j;
  j["name"] = c.name;
  j["stage_channels"] = c.stage_channels;
  j["inverted_counts"] = c.inverted_counts;
  j["mgc_counts"] = c.mgc_counts;
  j["mgc_distances"] = c.mgc_distances.empty() ? json(nullptr) : json(c.mgc_distances);
  j["cpe_kernel"] = c.cpe_kernel;
  j["expansion"] = c.expansion;
  j["num_classes"] = c.num_classes;
  j["input_resolution"] = c.input_resolution;
  j["graph_variant"] = variant_name(c.graph_variant);
  j["svga_k"] = c.svga_k;
  j["cpe_enabled"] = c.cpe_enabled;
  j["local_only"] = c.local_only;
  return j.dump(2) + "\n";
}

ModelConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = csv::read_file(path);
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  return config_from_json(text);
}

ModelConfig preset(const std::string& name) {
  ModelConfig c;
  c.name = name;
  c.num_classes = 1000;
  c.input_resolution = 224;
  if (name == "ti") {
    c.stage_channels = {32, 64, 160, 320};
    c.inverted_counts = {2, 2, 3, 2};
    c.mgc_counts = {0, 1, 2, 1};
  } else if (name == "s") {
    c.stage_channels = {48, 80, 160, 384};
    c.inverted_counts = {2, 2, 5, 2};
    c.mgc_counts = {0, 1, 2, 1};
  } else if (name == "m") {
    c.stage_channels = {32, 96, 160, 512};
    c.inverted_counts = {3, 3, 12, 3};
    c.mgc_counts = {0, 2, 2, 1};
  } else if (name == "b") {
    c.stage_channels = {64, 128, 256, 576};
    c.inverted_counts = {3, 4, 12, 3};
    c.mgc_counts = {0, 2, 2, 2};
  } else {
    throw ConfigError("unknown preset '" + name + "' (expected ti, s, m or b)");
  }
  c.validate();
  return c;
}

std::vector<std::string> preset_names() { return {"ti", "s", "m", "b"}; }

PublishedSize published_size(const std::string& name) {
  if (name == "ti") return {5.6, 0.6};
  if (name == "s") return {7.7, 0.9};
  if (name == "m") return {15.4, 1.6};
  if (name == "b") return {27.7, 3.6};
  throw ConfigError("no published size for '" + name + "'");
}

ModelConfig toy_config() {
  ModelConfig c;
  c.name = "toy";
  c.stage_channels = {8, 16, 32, 64};
  c.inverted_counts = {1, 1, 1, 1};
  c.mgc_counts = {0, 1, 1, 1};
  c.num_classes = 10;
  c.input_resolution = 32;
  c.validate();
  return c;
}

ModelConfig synth_config() {
  ModelConfig c;
  c.name = "synth";
  c.stage_channels = {16, 24, 32, 48};
  c.inverted_counts = {1, 1, 1, 1};
  c.mgc_counts = {0, 1, 1, 1};
  c.num_classes = 4;
  c.input_resolution = 32;
  c.validate();
  return c;
}

ModelConfig local_config() {
  ModelConfig c = synth_config();
  c.name = "synth-local";
  c.mgc_counts = {0, 0, 0, 0};
  c.local_only = true;
  c.validate();
  return c;
}

namespace {

std::size_t ir_params(std::size_t c, std::size_t e) {
  const std::size_t h = c * e;
  return (c * h + 2 * h) + (h * 9 + 2 * h) + (h * c + 2 * c);
}

std::size_t mgc_params(const ModelConfig& cfg, std::size_t c) {
  const std::size_t h = c * cfg.expansion;
  std::size_t p = (c * c + 2 * c) + (2 * c * c + 2 * c) + (c * h + 2 * h) + (h * c + 2 * c);
  if (cfg.cpe_enabled) p += c * cfg.cpe_kernel * cfg.cpe_kernel;
  return p;
}

}  // namespace

std::size_t count_params_analytic(const ModelConfig& cfg) {
  const std::size_t c1 = cfg.stage_channels[0];
  const std::size_t mid = (c1 + 1) / 2;
  std::size_t total = (kImageChannels * 9 * mid + 2 * mid) + (mid * 9 * c1 + 2 * c1);
  for (std::size_t i = 0; i < cfg.active_stages(); ++i) {
    const std::size_t c = cfg.stage_channels[i];
    if (i > 0) total += 9 * cfg.stage_channels[i - 1] * c + 2 * c;
    total += cfg.inverted_counts[i] * ir_params(c, cfg.expansion);
    total += cfg.mgc_counts[i] * mgc_params(cfg, c);
  }
  const std::size_t last = cfg.stage_channels[cfg.active_stages() - 1];
  const std::size_t hidden = cfg.head_hidden();
  total += last * hidden + hidden + hidden * cfg.num_classes + cfg.num_classes;
  return total;
}

std::size_t count_macs_analytic(const ModelConfig& cfg, std::size_t resolution) {
  const std::size_t c1 = cfg.stage_channels[0];
  const std::size_t mid = (c1 + 1) / 2;
  const std::size_t e = cfg.expansion;
  const std::size_t half = resolution / 2;
  const std::size_t quarter = resolution / 4;
  std::size_t total = half * half * mid * kImageChannels * 9 + quarter * quarter * c1 * mid * 9;
  for (std::size_t i = 0; i < cfg.active_stages(); ++i) {
    const std::size_t c = cfg.stage_channels[i];
    const std::size_t s = resolution >> (i + 2);
    const std::size_t area = s * s;
    if (i > 0) total += area * c * cfg.stage_channels[i - 1] * 9;
    total += cfg.inverted_counts[i] * area * (c * c * e + c * e * 9 + c * e * c);
    std::size_t mgc = c * c + 2 * c * c + c * c * e + c * e * c;
    if (cfg.cpe_enabled) mgc += c * cfg.cpe_kernel * cfg.cpe_kernel;
    total += cfg.mgc_counts[i] * area * mgc;
  }
  const std::size_t last = cfg.stage_channels[cfg.active_stages() - 1];
  total += last * cfg.head_hidden() + cfg.head_hidden() * cfg.num_classes;
  return total;
}

}  // namespace mgc
