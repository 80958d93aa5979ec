#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tailrisk/error.hpp"

namespace tailrisk::csv {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      fields.push_back(trim(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  fields.push_back(trim(field));
  return fields;
}

inline bool is_missing(const std::string& s) {
  return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "null" || s == "NULL";
}

inline std::optional<double> parse_double(const std::string& s) {
  if (is_missing(s)) {
    return std::nullopt;
  }
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(v)) {
    return std::nullopt;
  }
  return v;
}

inline std::size_t column_index(const std::vector<std::string>& header, const std::string& name,
                         const std::string& path) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) {
    throw InputError(path + ": missing column '" + name + "'");
  }
  return static_cast<std::size_t>(it - header.begin());
}

inline std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// A CSV file with '#' comment lines (text after the '#', trimmed), one header
/// row and string fields.
struct Table {
  std::vector<std::string> comments;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name, const std::string& path) const {
    return column_index(header, name, path);
  }
  /// Value of the first "# key: value" comment, if any.
  std::optional<std::string> meta(const std::string& key) const {
    const std::string prefix = key + ":";
    for (const auto& c : comments) {
      if (c.rfind(prefix, 0) == 0) {
        return trim(std::string_view(c).substr(prefix.size()));
      }
    }
    return std::nullopt;
  }
};

inline Table read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw InputError("cannot open '" + path + "'");
  }
  Table table;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("#", 0) == 0) {
      table.comments.push_back(trim(std::string_view(line).substr(1)));
      continue;
    }
    if (trim(line).empty()) {
      continue;
    }
    if (table.header.empty()) {
      table.header = split_csv(line);
    } else {
      table.rows.push_back(split_csv(line));
    }
  }
  if (table.header.empty()) {
    throw InputError(path + ": no header row");
  }
  return table;
}

inline double require_double(const std::string& field, const std::string& path, std::size_t row) {
  const auto v = parse_double(field);
  if (!v) {
    throw InputError(path + ": row " + std::to_string(row + 1) + ": bad number '" + field + "'");
  }
  return *v;
}

}  // namespace tailrisk::csv
