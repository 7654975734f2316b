#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "mlhealth/error.hpp"
#include "mlhealth/harness/stats.hpp"
#include "mlhealth/table.hpp"

namespace mlhealth::harness {

enum class LoadKind { periodic, flash, linear };

inline constexpr LoadKind kAllLoads[] = {LoadKind::flash, LoadKind::linear, LoadKind::periodic};

inline const char* to_string(LoadKind k) {
  switch (k) {
    case LoadKind::periodic: return "periodic";
    case LoadKind::flash: return "flash";
    case LoadKind::linear: return "linear";
  }
  return "?";
}

inline LoadKind parse_load_kind(std::string_view s) {
  if (s == "periodic") return LoadKind::periodic;
  if (s == "flash") return LoadKind::flash;
  if (s == "linear") return LoadKind::linear;
  throw InvalidInput("unknown load kind '" + std::string(s) + "'");
}

/// Deterministic 64-bit mixer (splitmix64 finalizer).
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream seed for one condition of a study.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view condition, std::uint64_t replicate = 0) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : condition) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return mix64(mix64(base) ^ h ^ mix64(replicate + 0x51ed27));
}

struct LoadSpec {
  LoadKind kind = LoadKind::periodic;
  std::size_t n_samples = 1000;
  std::size_t n_features = 4;
  std::uint64_t seed = 1;

  // Signal shape.
  double amplitude = 3.0;         // periodic swing and half the linear ramp span
  double cycles = 4.0;            // periodic cycles across the table
  double burst_height = 6.0;      // flash burst mean
  double burst_fraction = 0.1;    // flash burst length as a share of samples
  double linear_offset = 6.0;     // linear ramp centre
  double feature_noise = 0.6;     // per-cell Gaussian jitter

  // Label rule: y = [sum_f w_f x_f + N(0, label_noise) > label_threshold]
  // with alternating weights +1, -1, +1, ...
  double label_noise = 0.3;
  double label_threshold = 0.0;
};

struct LabeledTable {
  DataTable table;
  std::vector<int> labels;
};

inline std::string feature_name(std::size_t f) { return "f" + std::to_string(f); }

inline double label_weight(std::size_t f) { return f % 2 == 0 ? 1.0 : -1.0; }

/// Noise-free mean of feature f at relative position u in [0, 1).
inline double load_mean(const LoadSpec& spec, std::size_t f, double u) {
  switch (spec.kind) {
    case LoadKind::periodic: {
      double phase = 2.0 * std::numbers::pi * static_cast<double>(f) / static_cast<double>(spec.n_features + 1);
      return spec.amplitude * std::sin(2.0 * std::numbers::pi * spec.cycles * u + phase);
    }
    case LoadKind::flash: {
      double start = 0.5 - spec.burst_fraction / 2.0;
      bool burst = u >= start && u < start + spec.burst_fraction;
      return burst ? spec.burst_height : 0.0;
    }
    case LoadKind::linear: {
      double ramp = (2.0 * u - 1.0) * spec.amplitude * 1.5;
      return spec.linear_offset + (f % 2 == 0 ? ramp : -ramp);
    }
  }
  return 0.0;
}

inline std::vector<int> label_rows(const DataTable& table, const LoadSpec& spec, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, spec.label_noise);
  std::vector<int> labels;
  labels.reserve(table.num_rows());
  for (const auto& row : table.rows()) {
    double z = 0;
    for (std::size_t f = 0; f < row.size(); ++f) z += label_weight(f) * std::get<double>(row[f]);
    labels.push_back(z + noise(rng) > spec.label_threshold ? 1 : 0);
  }
  return labels;
}

/// Pure function of the spec: identical specs give identical tables.
inline LabeledTable gen_load(const LoadSpec& spec) {
  if (spec.n_samples == 0) throw InvalidInput("n_samples must be positive");
  if (spec.n_features == 0) throw InvalidInput("n_features must be positive");
  std::vector<std::string> cols;
  for (std::size_t f = 0; f < spec.n_features; ++f) cols.push_back(feature_name(f));
  DataTable table(cols);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> jitter(0.0, spec.feature_noise);
  for (std::size_t t = 0; t < spec.n_samples; ++t) {
    double u = static_cast<double>(t) / static_cast<double>(spec.n_samples);
    std::vector<Cell> row;
    row.reserve(spec.n_features);
    for (std::size_t f = 0; f < spec.n_features; ++f) row.emplace_back(load_mean(spec, f, u) + jitter(rng));
    table.add_row(std::move(row));
  }
  auto labels = label_rows(table, spec, rng);
  return {std::move(table), std::move(labels)};
}

/// `size` rows drawn uniformly without replacement from a fresh table of the
/// same load, so the batch is i.i.d. over the load's full time span.
inline LabeledTable draw_iid_batch(LoadSpec spec, std::size_t size, std::uint64_t seed) {
  spec.seed = seed;
  spec.n_samples = std::max(spec.n_samples, size);
  auto pool = gen_load(spec);
  std::mt19937_64 rng(mix64(seed));
  std::vector<std::size_t> idx(pool.table.num_rows());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(size);
  std::sort(idx.begin(), idx.end());
  LabeledTable out{DataTable(pool.table.columns()), {}};
  for (auto i : idx) {
    out.table.add_row(pool.table.rows()[i]);
    out.labels.push_back(pool.labels[i]);
  }
  return out;
}

/// Adds level * sigma_f * N(0,1) to every numeric cell, sigma_f being the
/// column's sample standard deviation. Label and missing cells are untouched.
inline DataTable inject_noise(const DataTable& table, double level, std::uint64_t seed) {
  if (!(level >= 0.0 && level < 1.0)) throw InvalidInput("noise level must be in [0, 1)");
  if (level == 0.0) return table;
  DataTable out = table;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  for (std::size_t c = 0; c < table.num_columns(); ++c) {
    std::vector<double> values;
    for (const auto& row : table.rows()) {
      if (const auto* d = std::get_if<double>(&row[c])) values.push_back(*d);
    }
    double sigma = stddev(values);
    if (sigma == 0.0) continue;
    for (auto& row : out.mutable_rows()) {
      if (auto* d = std::get_if<double>(&row[c])) *d += level * sigma * g(rng);
    }
  }
  return out;
}

}  // namespace mlhealth::harness
