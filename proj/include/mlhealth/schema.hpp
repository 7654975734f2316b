#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "mlhealth/error.hpp"
#include "mlhealth/table.hpp"

namespace mlhealth {

enum class FeatureKind { categorical, continuous };

inline const char* to_string(FeatureKind k) { return k == FeatureKind::categorical ? "categorical" : "continuous"; }

inline FeatureKind parse_feature_kind(std::string_view s) {
  if (s == "categorical") return FeatureKind::categorical;
  if (s == "continuous") return FeatureKind::continuous;
  throw InvalidInput("unknown feature kind '" + std::string(s) + "'");
}

inline constexpr std::size_t kDefaultBins = 10;

/// Equal-width interior bins plus implicit underflow and overflow bins.
///
/// Category layout for B interior bins: index 0 is underflow (value < edges[0]),
/// indices 1..B are [e_{i-1}, e_i) with the last interior bin closed on the
/// right, and index B+1 is overflow (also used for missing values).
class BinSpec {
 public:
  BinSpec() : edges_{0.0, 1.0} {}

  explicit BinSpec(std::vector<double> edges) : edges_(std::move(edges)) {
    if (edges_.size() < 2) throw InvalidInput("bin spec needs at least two edges");
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      if (!std::isfinite(edges_[i])) throw InvalidInput("bin edges must be finite");
      if (i > 0 && !(edges_[i] > edges_[i - 1])) throw InvalidInput("bin edges must be strictly increasing");
    }
  }

  const std::vector<double>& edges() const { return edges_; }
  std::size_t interior_bins() const { return edges_.size() - 1; }
  std::size_t category_count() const { return interior_bins() + 2; }
  std::size_t underflow_index() const { return 0; }
  std::size_t overflow_index() const { return interior_bins() + 1; }

  std::size_t index_of(double value) const {
    if (std::isnan(value)) return overflow_index();
    if (value < edges_.front()) return underflow_index();
    if (value > edges_.back()) return overflow_index();
    if (value == edges_.back()) return interior_bins();
    auto it = std::upper_bound(edges_.begin(), edges_.end(), value);
    return static_cast<std::size_t>(it - edges_.begin());
  }

  /// Ascending representative positions for every category: interior bin
  /// centres, with the open-ended bins placed half a neighbouring width out.
  std::vector<double> positions() const {
    std::vector<double> pos;
    pos.reserve(category_count());
    double first_w = edges_[1] - edges_[0];
    double last_w = edges_.back() - edges_[edges_.size() - 2];
    pos.push_back(edges_.front() - first_w / 2);
    for (std::size_t i = 0; i + 1 < edges_.size(); ++i) pos.push_back((edges_[i] + edges_[i + 1]) / 2);
    pos.push_back(edges_.back() + last_w / 2);
    return pos;
  }

  bool operator==(const BinSpec&) const = default;

 private:
  std::vector<double> edges_;
};

/// Equal-width bins spanning [min, max] of the finite values.
inline BinSpec compute_bins(std::span<const double> values, std::size_t n_bins) {
  if (n_bins == 0) throw InvalidInput("n_bins must be at least 1");
  bool any = false;
  double lo = 0, hi = 0;
  for (double v : values) {
    if (!std::isfinite(v)) continue;
    if (!any) {
      lo = hi = v;
      any = true;
    } else {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!any) throw InvalidInput("compute_bins needs at least one finite value");
  if (lo == hi) return BinSpec({lo, lo + 1.0});
  std::vector<double> edges(n_bins + 1);
  double step = (hi - lo) / static_cast<double>(n_bins);
  for (std::size_t i = 0; i < n_bins; ++i) edges[i] = lo + step * static_cast<double>(i);
  edges[n_bins] = hi;
  return BinSpec(std::move(edges));
}

inline BinSpec compute_bins(std::initializer_list<double> values, std::size_t n_bins) {
  return compute_bins(std::span<const double>(values.begin(), values.size()), n_bins);
}

/// Per-feature category structure fixed at training time.
class FeatureSchema {
 public:
  static FeatureSchema categorical(std::string name, std::vector<std::string> categories) {
    if (categories.empty()) throw InvalidInput("categorical feature '" + name + "' has no categories");
    std::set<std::string> seen;
    for (const auto& c : categories) {
      if (!seen.insert(c).second) throw InvalidInput("duplicate category '" + c + "' in feature '" + name + "'");
    }
    FeatureSchema s;
    s.name_ = std::move(name);
    s.kind_ = FeatureKind::categorical;
    s.categories_ = std::move(categories);
    return s;
  }

  static FeatureSchema continuous(std::string name, BinSpec bins) {
    FeatureSchema s;
    s.name_ = std::move(name);
    s.kind_ = FeatureKind::continuous;
    s.bins_ = std::move(bins);
    return s;
  }

  const std::string& name() const { return name_; }
  FeatureKind kind() const { return kind_; }
  bool is_categorical() const { return kind_ == FeatureKind::categorical; }
  const std::vector<std::string>& categories() const { return categories_; }
  const BinSpec& bins() const { return bins_; }

  /// Number of histogram slots: labels plus the reserved unseen slot, or B + 2.
  std::size_t category_count() const {
    return is_categorical() ? categories_.size() + 1 : bins_.category_count();
  }

  /// Slot that receives unseen labels and missing values.
  std::size_t unseen_index() const { return is_categorical() ? categories_.size() : bins_.overflow_index(); }

  /// Total mapping from a cell to its histogram slot.
  std::size_t discretize(const Cell& cell) const {
    if (is_missing(cell)) return unseen_index();
    if (is_categorical()) {
      std::string label = is_label(cell) ? std::get<std::string>(cell) : csv::format_number(std::get<double>(cell));
      auto it = std::find(categories_.begin(), categories_.end(), label);
      return it == categories_.end() ? unseen_index() : static_cast<std::size_t>(it - categories_.begin());
    }
    if (const auto* d = std::get_if<double>(&cell)) return bins_.index_of(*d);
    return unseen_index();
  }

  /// Positions used by the 1-D Wasserstein distance: bin centres, or indices.
  std::vector<double> positions() const {
    if (!is_categorical()) return bins_.positions();
    std::vector<double> pos(category_count());
    for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = static_cast<double>(i);
    return pos;
  }

  bool operator==(const FeatureSchema&) const = default;

 private:
  FeatureSchema() = default;

  std::string name_;
  FeatureKind kind_ = FeatureKind::categorical;
  std::vector<std::string> categories_;
  BinSpec bins_;
};

inline std::size_t discretize(const Cell& cell, const FeatureSchema& schema) { return schema.discretize(cell); }

using KindOverrides = std::map<std::string, FeatureKind>;

/// One schema per column. Label-valued columns (or overrides) are categorical;
/// the rest are binned over their non-missing values.
inline std::vector<FeatureSchema> infer_schema(const DataTable& table, const KindOverrides& overrides = {},
                                               std::size_t n_bins = kDefaultBins) {
  if (table.empty()) throw InvalidInput("cannot infer schema from an empty table");
  if (n_bins == 0) throw InvalidInput("n_bins must be at least 1");
  std::vector<FeatureSchema> out;
  out.reserve(table.num_columns());
  for (std::size_t col = 0; col < table.num_columns(); ++col) {
    const auto& name = table.columns()[col];
    bool has_label = false;
    std::vector<double> numbers;
    std::set<std::string> labels;
    std::size_t present = 0;
    for (const auto& row : table.rows()) {
      const Cell& c = row[col];
      if (is_missing(c)) continue;
      ++present;
      if (const auto* d = std::get_if<double>(&c)) {
        numbers.push_back(*d);
        labels.insert(csv::format_number(*d));
      } else {
        has_label = true;
        labels.insert(std::get<std::string>(c));
      }
    }
    if (present == 0) throw InvalidInput("column '" + name + "' has no non-missing values");

    std::optional<FeatureKind> hint;
    if (auto it = overrides.find(name); it != overrides.end()) hint = it->second;
    if (hint == FeatureKind::continuous && has_label) {
      throw InvalidInput("column '" + name + "' holds labels and cannot be continuous");
    }
    bool categorical = hint ? *hint == FeatureKind::categorical : has_label;
    if (categorical) {
      out.push_back(FeatureSchema::categorical(name, {labels.begin(), labels.end()}));
    } else {
      out.push_back(FeatureSchema::continuous(name, compute_bins(numbers, n_bins)));
    }
  }
  return out;
}

/// Row-major slot indices for every cell, columns matched by schema name.
inline std::vector<std::vector<std::size_t>> encode(const DataTable& table, std::span<const FeatureSchema> schemas) {
  std::vector<std::size_t> cols;
  cols.reserve(schemas.size());
  for (const auto& s : schemas) cols.push_back(table.column_index(s.name()));
  std::vector<std::vector<std::size_t>> out(table.num_rows(), std::vector<std::size_t>(schemas.size()));
  for (std::size_t r = 0; r < table.num_rows(); ++r) {
    for (std::size_t f = 0; f < schemas.size(); ++f) out[r][f] = schemas[f].discretize(table.at(r, cols[f]));
  }
  return out;
}

}  // namespace mlhealth
