#pragma once

#include <cstddef>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace mgc {

enum class GraphVariant { svga, mgc };

const char* variant_name(GraphVariant v);
GraphVariant parse_variant(const std::string& name);

/// Which static graph to build and its distance parameter: K for SVGA
/// (connect every K-th token right and down), L for MGC (one link each way
/// at distance L).
struct GraphSpec {
  GraphVariant variant = GraphVariant::mgc;
  int param = 2;

  friend bool operator==(const GraphSpec&, const GraphSpec&) = default;
};

struct Offset {
  int dy = 0;
  int dx = 0;

  friend bool operator==(const Offset&, const Offset&) = default;
  friend auto operator<=>(const Offset&, const Offset&) = default;
};

using Token = std::pair<std::size_t, std::size_t>;

/// Static cyclic connectivity over an h x w token grid.
///
/// Token (i, j) is connected to itself and to ((i + dy) mod h, (j + dx) mod w)
/// for every stored offset. Offsets are reduced so that no two are congruent
/// modulo the grid and none is congruent to (0, 0). Horizontal offsets come
/// first in ascending dx, then vertical offsets in ascending dy.
class GraphPattern {
 public:
  GraphPattern(GraphSpec spec, std::size_t height, std::size_t width, std::vector<Offset> shifts)
      : spec_(spec), height_(height), width_(width), shifts_(std::move(shifts)) {}

  const GraphSpec& spec() const { return spec_; }
  GraphVariant variant() const { return spec_.variant; }
  int param() const { return spec_.param; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  const std::vector<Offset>& shifts() const { return shifts_; }

  /// Graph degree including the self-loop; the same for every token.
  std::size_t connections_per_token() const { return shifts_.size() + 1; }

  friend bool operator==(const GraphPattern&, const GraphPattern&) = default;

 private:
  GraphSpec spec_;
  std::size_t height_;
  std::size_t width_;
  std::vector<Offset> shifts_;
};

/// Throws std::invalid_argument for non-positive sizes or parameters, and
/// for MGC when L >= max(height, width) on grids larger than 1x1. On a 1x1
/// grid every link wraps onto the token itself, leaving only the self-loop.
GraphPattern build_pattern(GraphSpec spec, std::size_t height, std::size_t width);

/// Sorted, duplicate-free neighbour set of token (i, j), self included.
std::vector<Token> neighbor_list(const GraphPattern& pattern, std::size_t i, std::size_t j);

struct GrowthRow {
  GraphVariant variant = GraphVariant::mgc;
  int param = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t connections = 0;

  friend bool operator==(const GrowthRow&, const GrowthRow&) = default;
};

/// Connections per token on square grids of each listed resolution.
std::vector<GrowthRow> connection_growth_table(GraphSpec spec, const std::vector<std::size_t>& resolutions);

/// Closed form for SVGA: 1 + floor((w - 1) / K) + floor((h - 1) / K).
std::size_t svga_connections(int k, std::size_t height, std::size_t width);
/// Closed form for MGC: 1 plus the number of distinct non-zero residues of
/// +-L modulo w and modulo h. Equals 5 whenever 2L is not a multiple of h or w.
std::size_t mgc_connections(int l, std::size_t height, std::size_t width);
std::size_t expected_connections(GraphSpec spec, std::size_t height, std::size_t width);

std::string growth_table_csv(const std::vector<GrowthRow>& rows);
std::vector<GrowthRow> parse_growth_table_csv(const std::string& text);

}  // namespace mgc
