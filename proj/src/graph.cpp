#include "mgc/graph.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <stdexcept>

#include "mgc/csv.hpp"

namespace mgc {

const char* variant_name(GraphVariant v) { return v == GraphVariant::svga ? "svga" : "mgc"; }

GraphVariant parse_variant(const std::string& name) {
  std::string lower;
  for (char ch : name) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (lower == "svga") return GraphVariant::svga;
  if (lower == "mgc") return GraphVariant::mgc;
  throw std::invalid_argument("unknown graph variant '" + name + "' (expected svga or mgc)");
}

namespace {

std::size_t wrap(long v, std::size_t m) {
  const long mm = static_cast<long>(m);
  return static_cast<std::size_t>(((v % mm) + mm) % mm);
}

}  // namespace

GraphPattern build_pattern(GraphSpec spec, std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) {
    throw std::invalid_argument("build_pattern: grid must be at least 1x1");
  }
  if (spec.param < 1) {
    throw std::invalid_argument(std::string("build_pattern: ") + (spec.variant == GraphVariant::svga ? "K" : "L") +
                                " must be >= 1, got " + std::to_string(spec.param));
  }
  const std::size_t p = static_cast<std::size_t>(spec.param);
  std::vector<Offset> shifts;
  if (spec.variant == GraphVariant::svga) {
    for (std::size_t d = p; d <= width - 1; d += p) shifts.push_back({0, static_cast<int>(d)});
    for (std::size_t d = p; d <= height - 1; d += p) shifts.push_back({static_cast<int>(d), 0});
    return GraphPattern(spec, height, width, std::move(shifts));
  }

  const std::size_t extent = std::max(height, width);
  if (extent > 1 && p >= extent) {
    throw std::invalid_argument("build_pattern: MGC distance L=" + std::to_string(p) + " must be below max(h, w)=" +
                                std::to_string(extent) + " on a " + std::to_string(height) + "x" +
                                std::to_string(width) + " grid");
  }
  const int l = spec.param;
  const Offset candidates[] = {{0, -l}, {0, l}, {-l, 0}, {l, 0}};
  std::set<std::pair<std::size_t, std::size_t>> seen{{0, 0}};
  for (const Offset& o : candidates) {
    if (seen.insert({wrap(o.dy, height), wrap(o.dx, width)}).second) {
      shifts.push_back(o);
    }
  }
  return GraphPattern(spec, height, width, std::move(shifts));
}

std::vector<Token> neighbor_list(const GraphPattern& pattern, std::size_t i, std::size_t j) {
  if (i >= pattern.height() || j >= pattern.width()) {
    throw std::out_of_range("neighbor_list: token (" + std::to_string(i) + ", " + std::to_string(j) +
                            ") outside " + std::to_string(pattern.height()) + "x" + std::to_string(pattern.width()));
  }
  std::set<Token> out{{i, j}};
  for (const Offset& o : pattern.shifts()) {
    out.insert({wrap(static_cast<long>(i) + o.dy, pattern.height()), wrap(static_cast<long>(j) + o.dx, pattern.width())});
  }
  return {out.begin(), out.end()};
}

std::size_t svga_connections(int k, std::size_t height, std::size_t width) {
  const std::size_t kk = static_cast<std::size_t>(k);
  return 1 + (width - 1) / kk + (height - 1) / kk;
}

std::vector<GrowthRow> connection_growth_table(GraphSpec spec, const std::vector<std::size_t>& resolutions) {
  std::vector<GrowthRow> rows;
  for (std::size_t r : resolutions) {
    const GraphPattern p = build_pattern(spec, r, r);
    rows.push_back({spec.variant, spec.param, r, r, p.connections_per_token()});
  }
  return rows;
}

std::size_t mgc_connections(int l, std::size_t height, std::size_t width) {
  auto links = [l](std::size_t extent) -> std::size_t {
    const std::size_t r = static_cast<std::size_t>(l) % extent;
    if (r == 0) return 0;
    return 2 * r == extent ? 1 : 2;
  };
  return 1 + links(width) + links(height);
}

std::size_t expected_connections(GraphSpec spec, std::size_t height, std::size_t width) {
  return spec.variant == GraphVariant::svga ? svga_connections(spec.param, height, width)
                                            : mgc_connections(spec.param, height, width);
}

std::string growth_table_csv(const std::vector<GrowthRow>& rows) {
  csv::Table t;
  t.header = {"variant", "param", "height", "width", "connections"};
  for (const auto& r : rows) {
    t.rows.push_back({variant_name(r.variant), std::to_string(r.param), std::to_string(r.height),
                      std::to_string(r.width), std::to_string(r.connections)});
  }
  return csv::emit(t);
}

std::vector<GrowthRow> parse_growth_table_csv(const std::string& text) {
  const csv::Table t = csv::parse(text);
  const auto cv = csv::column(t, "variant"), cp = csv::column(t, "param"), ch = csv::column(t, "height"),
             cw = csv::column(t, "width"), cc = csv::column(t, "connections");
  std::vector<GrowthRow> rows;
  for (const auto& f : t.rows) {
    rows.push_back({parse_variant(f[cv]), static_cast<int>(csv::parse_int(f[cp])),
                    static_cast<std::size_t>(csv::parse_int(f[ch])), static_cast<std::size_t>(csv::parse_int(f[cw])),
                    static_cast<std::size_t>(csv::parse_int(f[cc]))});
  }
  return rows;
}

}  // namespace mgc
