#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "colflux/errors.hpp"
#include "colflux/observe.hpp"

namespace colflux::io {

/// Shortest decimal that round-trips to the same double.
inline std::string format_double(double v) {
  if (v == 0.0) return "0";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

/// Comma-separated table with a header row and LF line endings.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : columns_(header.size()) {
    write_row_text(header);
  }

  void row(std::span<const double> values) {
    if (values.size() != columns_) throw ArgumentError("CsvWriter: row width mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) out_ << ',';
      out_ << format_double(values[i]);
    }
    out_ << '\n';
  }

  void row(std::initializer_list<double> values) { row(std::span<const double>(values.begin(), values.size())); }

  std::string str() const { return out_.str(); }

 private:
  void write_row_text(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

  std::size_t columns_;
  std::ostringstream out_;
};

inline std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, 16);
  std::string s(buf, res.ptr);
  return std::string(16 - s.size(), '0') + s;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string(), "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

inline std::string observations_csv(const ObservationSet& obs) {
  CsvWriter w({"t", "y", "r"});
  for (const auto& o : obs) w.row({o.t, o.y, o.r});
  return w.str();
}

namespace detail {

inline double parse_number(std::string_view cell, std::size_t line) {
  while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
  while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) {
    cell.remove_suffix(1);
  }
  double v = 0.0;
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
    throw ArgumentError("line " + std::to_string(line) + ": cannot parse number '" +
                        std::string(cell) + "'");
  }
  return v;
}

}  // namespace detail

/// Reads t,y,r rows (header required).
inline ObservationSet parse_observations_csv(std::string_view text) {
  std::vector<Observation> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header = true;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty() || line == "\r") continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<double> cells;
    std::size_t p = 0;
    while (true) {
      const std::size_t c = line.find(',', p);
      cells.push_back(detail::parse_number(line.substr(p, c - p), line_no));
      if (c == std::string_view::npos) break;
      p = c + 1;
    }
    if (cells.size() != 3) {
      throw ArgumentError("line " + std::to_string(line_no) + ": expected 3 columns t,y,r");
    }
    out.push_back({cells[0], cells[1], cells[2]});
  }
  return ObservationSet(std::move(out));
}

}  // namespace colflux::io
