#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mcelmap/errors.hpp"
#include "mcelmap/trajectory.hpp"

namespace mcelmap {

enum class Format { Csv, Json };

inline Format parse_format(std::string_view tag) {
  if (tag == "csv") return Format::Csv;
  if (tag == "json") return Format::Json;
  throw FormatError("unknown format '" + std::string(tag) + "' (expected csv or json)");
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline double parse_double(std::string_view field, std::size_t line) {
  field = trim(field);
  double value = 0.0;
  const char* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (field.empty() || ec != std::errc() || ptr != end) {
    throw FormatError("line " + std::to_string(line) + ": cannot parse '" +
                      std::string(field) + "' as a number");
  }
  if (!std::isfinite(value)) {
    throw FormatError("line " + std::to_string(line) + ": non-finite value");
  }
  return value;
}

inline Trajectory to_trajectory(const std::vector<std::vector<double>>& rows,
                                const std::string& where) {
  if (rows.size() < static_cast<std::size_t>(Trajectory::kMinLength)) {
    throw SizeError(where + ": demonstration has " + std::to_string(rows.size()) +
                    " points, need at least 3");
  }
  Eigen::MatrixXd pts(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      pts(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return Trajectory(std::move(pts));
}

}  // namespace detail

/// One point per line, comma separated; a blank line starts a new demonstration.
/// Lines beginning with '#' are ignored.
inline std::vector<Trajectory> parse_csv(std::string_view text) {
  std::vector<Trajectory> demos;
  std::vector<std::vector<double>> rows;
  std::size_t width = 0;
  std::size_t line_no = 0;
  std::size_t block_start = 1;

  auto flush = [&] {
    if (!rows.empty()) {
      demos.push_back(detail::to_trajectory(rows, "record at line " + std::to_string(block_start)));
      rows.clear();
    }
  };

  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = detail::trim(text.substr(pos, nl - pos));
    ++line_no;
    pos = nl + 1;
    if (!line.empty() && line.front() == '#') continue;
    if (line.empty()) {
      flush();
      if (nl == text.size()) break;
      continue;
    }
    if (rows.empty()) block_start = line_no;
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      auto comma = line.find(',', start);
      row.push_back(detail::parse_double(
          line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start),
          line_no));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (width == 0) width = row.size();
    if (row.size() != width) {
      throw FormatError("line " + std::to_string(line_no) + ": expected " + std::to_string(width) +
                        " fields, got " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
    if (nl == text.size()) break;
  }
  flush();
  if (demos.empty()) throw FormatError("no points found in CSV input");
  return demos;
}

/// `{"demos": [[[x, y, ...], ...], ...]}`
inline std::vector<Trajectory> parse_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("demos") || !doc["demos"].is_array()) {
    throw FormatError("JSON input must be an object with a \"demos\" array");
  }
  std::vector<Trajectory> demos;
  std::size_t width = 0;
  const auto& list = doc["demos"];
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string where = "demo " + std::to_string(i);
    if (!list[i].is_array()) throw FormatError(where + ": expected an array of points");
    std::vector<std::vector<double>> rows;
    for (std::size_t r = 0; r < list[i].size(); ++r) {
      const auto& p = list[i][r];
      if (!p.is_array() || p.empty()) {
        throw FormatError(where + ", point " + std::to_string(r) + ": expected a non-empty array");
      }
      std::vector<double> row;
      for (const auto& v : p) {
        if (!v.is_number()) {
          throw FormatError(where + ", point " + std::to_string(r) + ": non-numeric coordinate");
        }
        const double x = v.get<double>();
        if (!std::isfinite(x)) throw FormatError(where + ": non-finite value");
        row.push_back(x);
      }
      if (width == 0) width = row.size();
      if (row.size() != width) {
        throw FormatError(where + ", point " + std::to_string(r) + ": dimension mismatch");
      }
      rows.push_back(std::move(row));
    }
    demos.push_back(detail::to_trajectory(rows, where));
  }
  if (demos.empty()) throw FormatError("JSON input contains no demonstrations");
  return demos;
}

inline std::vector<Trajectory> parse_demonstrations(std::string_view text, Format format) {
  return format == Format::Csv ? parse_csv(text) : parse_json(text);
}

inline std::vector<Trajectory> load_demonstrations(const std::filesystem::path& path,
                                                   Format format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_demonstrations(buf.str(), format);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

// Writers. Values are printed with 17 significant digits so they parse back exactly.

inline void write_points_csv(std::ostream& out, const Eigen::MatrixXd& pts) {
  out << std::setprecision(17);
  for (Eigen::Index r = 0; r < pts.rows(); ++r) {
    for (Eigen::Index c = 0; c < pts.cols(); ++c) {
      if (c) out << ',';
      out << pts(r, c);
    }
    out << '\n';
  }
}

inline std::string demos_to_csv(const std::vector<Trajectory>& demos) {
  std::ostringstream out;
  for (std::size_t i = 0; i < demos.size(); ++i) {
    if (i) out << '\n';
    write_points_csv(out, demos[i].points());
  }
  return out.str();
}

inline nlohmann::json points_to_json(const Eigen::MatrixXd& pts) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < pts.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < pts.cols(); ++c) row.push_back(pts(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string demos_to_json(const std::vector<Trajectory>& demos) {
  nlohmann::json doc;
  doc["demos"] = nlohmann::json::array();
  for (const auto& d : demos) doc["demos"].push_back(points_to_json(d.points()));
  return doc.dump();
}

}  // namespace mcelmap
