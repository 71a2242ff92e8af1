#pragma once

// Small CSV helpers shared by the pipeline stages. Every data file starts with
// '#' comment lines carrying the tool version and config hash; readers skip
// them.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "unsatnet/error.hpp"
#include "unsatnet/grid.hpp"

namespace unsatnet {

inline constexpr const char* kToolVersion = "0.1.0";

/// 17 significant digits: round-trips every double.
inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Shortest round-trip text for a double, used in file names.
inline std::string fmt_short(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Header comment block: version, config hash, then any extra `key=value`.
inline std::string file_header(const std::string& config_hash,
                               const std::vector<std::string>& extra = {}) {
  std::string s = "# unsatnet " + std::string(kToolVersion) + " config_hash=" + config_hash + "\n";
  for (const auto& e : extra) s += "# " + e + "\n";
  return s;
}

inline void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << content;
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("missing input file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline double parse_double(std::string_view tok, const std::string& where) {
  std::string s(tok);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size())
    throw IoError("not a number '" + s + "' in " + where);
  return v;
}

/// Comma-separated rows, comment lines and blank lines dropped. When
/// `has_header` the first data row is returned separately as column names.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t c = 0; c < columns.size(); ++c)
      if (columns[c] == name) return c;
    throw IoError("missing column '" + name + "'");
  }
};

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline CsvTable read_csv(const std::filesystem::path& path, bool has_header) {
  const std::string text = read_text(path);
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto cells = split_csv_line(line);
    if (first && has_header) {
      t.columns = std::move(cells);
    } else {
      t.rows.push_back(std::move(cells));
    }
    first = false;
  }
  return t;
}

/// Grid as ny rows of nx values, bottom row (j = 0) first.
inline std::string grid_csv(const ScalarGrid& g) {
  std::string s;
  for (std::size_t j = 0; j < g.ny(); ++j) {
    for (std::size_t i = 0; i < g.nx(); ++i) {
      if (i) s += ',';
      s += fmt(g(i, j));
    }
    s += '\n';
  }
  return s;
}

inline ScalarGrid read_grid_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path, false);
  if (t.rows.empty()) throw IoError("empty grid file: " + path.string());
  const std::size_t nx = t.rows[0].size(), ny = t.rows.size();
  ScalarGrid g(nx, ny);
  for (std::size_t j = 0; j < ny; ++j) {
    if (t.rows[j].size() != nx) throw IoError("ragged grid file: " + path.string());
    for (std::size_t i = 0; i < nx; ++i) g(i, j) = parse_double(t.rows[j][i], path.string());
  }
  return g;
}

}  // namespace unsatnet
