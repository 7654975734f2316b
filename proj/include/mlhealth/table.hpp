#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <variant>
#include <vector>

#include "mlhealth/error.hpp"

namespace mlhealth {

/// A single table cell: missing, a real number, or a category label.
using Cell = std::variant<std::monostate, double, std::string>;

inline bool is_missing(const Cell& c) { return std::holds_alternative<std::monostate>(c); }
inline bool is_number(const Cell& c) { return std::holds_alternative<double>(c); }
inline bool is_label(const Cell& c) { return std::holds_alternative<std::string>(c); }

/// Rectangular table with unique column names.
class DataTable {
 public:
  DataTable() = default;

  explicit DataTable(std::vector<std::string> columns) : columns_(std::move(columns)) {
    std::unordered_set<std::string> seen;
    for (const auto& name : columns_) {
      if (!seen.insert(name).second) {
        throw InvalidInput("duplicate column name '" + name + "'");
      }
    }
  }

  DataTable(std::vector<std::string> columns, std::vector<std::vector<Cell>> rows)
      : DataTable(std::move(columns)) {
    for (auto& r : rows) add_row(std::move(r));
  }

  void add_row(std::vector<Cell> row) {
    if (row.size() != columns_.size()) {
      throw InvalidInput("row has " + std::to_string(row.size()) + " cells, expected " +
                         std::to_string(columns_.size()));
    }
    rows_.push_back(std::move(row));
  }

  const std::vector<std::string>& columns() const { return columns_; }
  const std::vector<std::vector<Cell>>& rows() const { return rows_; }
  std::vector<std::vector<Cell>>& mutable_rows() { return rows_; }

  std::size_t num_rows() const { return rows_.size(); }
  std::size_t num_columns() const { return columns_.size(); }
  bool empty() const { return rows_.empty(); }

  /// Index of the named column, or npos.
  std::size_t find_column(std::string_view name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      if (columns_[i] == name) return i;
    }
    return npos;
  }

  std::size_t column_index(std::string_view name) const {
    auto idx = find_column(name);
    if (idx == npos) throw NotFound("missing column '" + std::string(name) + "'");
    return idx;
  }

  const Cell& at(std::size_t row, std::size_t col) const { return rows_.at(row).at(col); }

  std::vector<Cell> column(std::size_t col) const {
    std::vector<Cell> out;
    out.reserve(rows_.size());
    for (const auto& r : rows_) out.push_back(r[col]);
    return out;
  }

  /// Rows of `other` appended below this table's rows; columns must match.
  DataTable concat(const DataTable& other) const {
    if (other.columns_ != columns_) throw InvalidInput("cannot concatenate tables with different columns");
    DataTable out = *this;
    out.rows_.insert(out.rows_.end(), other.rows_.begin(), other.rows_.end());
    return out;
  }

  bool operator==(const DataTable&) const = default;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<Cell>> rows_;
};

namespace csv {

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Splits one logical record; returns false at end of input.
inline bool read_record(std::istream& in, std::vector<std::string>& fields, std::vector<bool>& quoted) {
  fields.clear();
  quoted.clear();
  std::string field;
  bool in_quotes = false;
  bool was_quoted = false;
  bool any = false;
  char ch;
  while (in.get(ch)) {
    any = true;
    if (in_quotes) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"') {
      in_quotes = true;
      was_quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      quoted.push_back(was_quoted);
      field.clear();
      was_quoted = false;
    } else if (ch == '\n') {
      fields.push_back(std::move(field));
      quoted.push_back(was_quoted);
      return true;
    } else {
      field.push_back(ch);
    }
  }
  if (in_quotes) throw InvalidInput("unterminated quoted field in CSV");
  if (!any) return false;
  fields.push_back(std::move(field));
  quoted.push_back(was_quoted);
  return true;
}

}  // namespace detail

/// Number-else-label: empty is missing; finite numerics become doubles.
inline Cell parse_cell(std::string_view raw, bool quoted = false) {
  auto s = detail::trim(raw);
  if (s.empty() && !quoted) return std::monostate{};
  if (!quoted) {
    double v = 0.0;
    const char* first = s.data();
    if (!s.empty() && s.front() == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(v)) return v;
  }
  if (s.empty()) return std::monostate{};
  return std::string(s);
}

inline DataTable read(std::istream& in) {
  std::vector<std::string> fields;
  std::vector<bool> quoted;
  std::vector<std::string> header;
  while (detail::read_record(in, fields, quoted)) {
    if (fields.size() == 1 && detail::trim(fields[0]).empty()) continue;
    for (auto& f : fields) header.emplace_back(detail::trim(f));
    break;
  }
  if (header.empty()) throw InvalidInput("CSV has no header row");
  DataTable table(header);
  std::size_t line = 1;
  while (detail::read_record(in, fields, quoted)) {
    ++line;
    if (fields.size() == 1 && detail::trim(fields[0]).empty() && !quoted[0]) continue;
    if (fields.size() != header.size()) {
      throw InvalidInput("CSV record " + std::to_string(line) + " has " + std::to_string(fields.size()) +
                         " fields, expected " + std::to_string(header.size()));
    }
    std::vector<Cell> row;
    row.reserve(fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i) row.push_back(parse_cell(fields[i], quoted[i]));
    table.add_row(std::move(row));
  }
  return table;
}

inline DataTable read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("cannot open '" + path + "'");
  return read(in);
}

inline DataTable parse(std::string_view text) {
  std::istringstream in{std::string(text)};
  return read(in);
}

/// Shortest representation that round-trips.
inline std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::string escape(std::string_view s) {
  bool needs = s.find_first_of(",\"\n\r") != std::string_view::npos;
  // Labels that would otherwise parse as numbers or missing keep their quotes.
  if (!needs) {
    if (s.empty() || !is_label(parse_cell(s))) needs = true;
  }
  if (!needs) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline void write(std::ostream& out, const DataTable& table) {
  for (std::size_t i = 0; i < table.num_columns(); ++i) {
    if (i) out << ',';
    out << escape(table.columns()[i]);
  }
  out << '\n';
  for (const auto& row : table.rows()) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      if (const auto* d = std::get_if<double>(&row[i])) {
        out << format_number(*d);
      } else if (const auto* s = std::get_if<std::string>(&row[i])) {
        out << escape(*s);
      }
    }
    out << '\n';
  }
}

inline void write_file(const std::string& path, const DataTable& table) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  write(out, table);
}

}  // namespace csv

}  // namespace mlhealth
