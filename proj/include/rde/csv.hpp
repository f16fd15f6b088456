#pragma once

#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rde/errors.hpp"

namespace rde {

// Delimited text table.  Rows hold raw field strings; typed access happens at
// the call site where a useful error message (line, column) can be formed.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  // 1-based source line per data row, for error reporting
  std::vector<std::size_t> lines;

  std::optional<std::size_t> column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  }

  std::size_t require_column(std::string_view name) const {
    if (auto c = column(name)) return *c;
    throw SchemaError("missing required column '" + std::string(name) + "'");
  }
};

namespace detail {

// Splits one physical line.  Fields may be quoted with '"'; a doubled quote
// inside a quoted field is an escaped quote.  Embedded newlines are not
// supported (none of the supported inputs need them).
inline std::vector<std::string> split_delimited(std::string_view line, char delim,
                                                std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"' && cur.empty()) {
      quoted = true;
    } else if (c == delim) {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted)
    throw DataError("unterminated quoted field on line " + std::to_string(line_no));
  fields.push_back(std::move(cur));
  return fields;
}

}  // namespace detail

inline Table read_delimited(std::istream& in, char delim) {
  Table t;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!have_header) {
      if (line.empty()) continue;  // tolerate leading blank lines
      t.header = detail::split_delimited(line, delim, line_no);
      if (t.header.empty() || (t.header.size() == 1 && t.header[0].empty()))
        throw SchemaError("input has an empty header line");
      have_header = true;
      continue;
    }
    if (line.empty()) continue;
    auto fields = detail::split_delimited(line, delim, line_no);
    if (fields.size() != t.header.size())
      throw DataError("line " + std::to_string(line_no) + " has " +
                      std::to_string(fields.size()) + " fields, header has " +
                      std::to_string(t.header.size()));
    t.rows.push_back(std::move(fields));
    t.lines.push_back(line_no);
  }
  if (!have_header) throw SchemaError("input is empty; expected a header line");
  return t;
}

// Numeric cell parsers.  Empty cells map to NaN so that later completeness
// checks can name the record they belong to; anything else must parse fully.
inline double parse_double_cell(std::string_view s, std::size_t line_no,
                                std::string_view column) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  double value = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || p != s.data() + s.size())
    throw DataError("line " + std::to_string(line_no) + ", column '" + std::string(column) +
                    "': cannot parse '" + std::string(s) + "' as a number");
  return value;
}

inline long long parse_int_cell(std::string_view s, std::size_t line_no,
                                std::string_view column) {
  long long value = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size())
    throw DataError("line " + std::to_string(line_no) + ", column '" + std::string(column) +
                    "': cannot parse '" + std::string(s) + "' as an integer");
  return value;
}

// Field quoting for writers: quote only when the delimiter or a quote is present
inline std::string csv_escape(std::string_view s, char delim) {
  const bool needs = s.find(delim) != std::string_view::npos ||
                     s.find('"') != std::string_view::npos;
  if (!needs) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

}  // namespace rde
