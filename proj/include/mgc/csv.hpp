#pragma once

#include <string>
#include <string_view>
#include <vector>

// Minimal comma-separated tables. Fields never need quoting here, so any
// field containing a comma, quote or line break is rejected on emit. Lines
// starting with '#' are comments (used for methodology notes).

namespace mgc::csv {

struct Table {
  std::vector<std::string> comments;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  friend bool operator==(const Table&, const Table&) = default;
};

std::string emit(const Table& table);
Table parse(std::string_view text);

/// Shortest representation that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view s);
long long parse_int(std::string_view s);

/// Index of `name` in the header; throws std::invalid_argument if absent.
std::size_t column(const Table& table, std::string_view name);

void write_file(const std::string& path, const std::string& text);
std::string read_file(const std::string& path);

}  // namespace mgc::csv
