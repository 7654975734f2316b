#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlhealth/error.hpp"
#include "mlhealth/profile.hpp"

namespace mlhealth {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr std::size_t kDefaultTopK = 5;

using CountSpan = std::span<const std::uint64_t>;

namespace detail {

inline void check_pair(CountSpan f_train, CountSpan f_infer, std::uint64_t n_train, std::uint64_t n_infer) {
  if (f_train.size() != f_infer.size()) {
    throw InvalidInput("histogram length mismatch: " + std::to_string(f_train.size()) + " vs " +
                       std::to_string(f_infer.size()));
  }
  if (f_train.empty()) throw InvalidInput("histograms are empty");
  if (n_train == 0 || total(f_train) != n_train) throw InvalidInput("training counts must sum to a positive N_T");
  if (n_infer == 0 || total(f_infer) != n_infer) throw InvalidInput("inference counts must sum to a positive N_I");
}

inline std::vector<double> normalized(CountSpan f, std::uint64_t n) {
  std::vector<double> out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = static_cast<double>(f[i]) / static_cast<double>(n);
  return out;
}

}  // namespace detail

struct Similarity {
  double raw = 0.0;
  double clipped = 0.0;
};

/// Normalized mean training probability of an inference batch, frequency form:
///
///   raw = (N_T / N_I) * sum_i f_T,i * f_I,i / sum_j f_T,j^2
///
/// A batch proportional to the training histogram scores exactly 1; mass on
/// train-common slots can push raw above 1, which `clipped` caps.
inline Similarity similarity(CountSpan f_train, CountSpan f_infer, std::uint64_t n_train, std::uint64_t n_infer) {
  detail::check_pair(f_train, f_infer, n_train, n_infer);
  long double cross = 0, self = 0;
  for (std::size_t i = 0; i < f_train.size(); ++i) {
    auto t = static_cast<long double>(f_train[i]);
    cross += t * static_cast<long double>(f_infer[i]);
    self += t * t;
  }
  long double raw = (static_cast<long double>(n_train) * cross) / (static_cast<long double>(n_infer) * self);
  double r = static_cast<double>(raw);
  return {r, std::min(1.0, r)};
}

/// Sample-by-sample form of the same score: the mean training probability of
/// each inference sample, divided by the mean training probability of the
/// training set itself. Kept as an independent route to `similarity`.
inline double similarity_naive(CountSpan f_train, std::uint64_t n_train, std::span<const std::size_t> samples) {
  if (samples.empty()) throw InvalidInput("batch has no samples");
  if (f_train.empty() || n_train == 0 || total(f_train) != n_train) {
    throw InvalidInput("training counts must sum to a positive N_T");
  }
  const double nt = static_cast<double>(n_train);
  double sum_p = 0;
  for (std::size_t c : samples) {
    if (c >= f_train.size()) throw InvalidInput("sample category out of range");
    sum_p += static_cast<double>(f_train[c]) / nt;
  }
  double p_infer = sum_p / static_cast<double>(samples.size());
  double p_train = 0;
  for (auto f : f_train) {
    double p = static_cast<double>(f) / nt;
    p_train += p * p;
  }
  return p_infer / p_train;
}

/// KL(train || inference) in nats, without smoothing. Infinite when a slot
/// with training mass is empty in the batch.
inline double kl_divergence(CountSpan f_train, CountSpan f_infer, std::uint64_t n_train, std::uint64_t n_infer) {
  detail::check_pair(f_train, f_infer, n_train, n_infer);
  double kl = 0;
  for (std::size_t i = 0; i < f_train.size(); ++i) {
    if (f_train[i] == 0) continue;
    if (f_infer[i] == 0) return kInf;
    double p = static_cast<double>(f_train[i]) / static_cast<double>(n_train);
    double q = static_cast<double>(f_infer[i]) / static_cast<double>(n_infer);
    kl += p * std::log(p / q);
  }
  return std::max(0.0, kl);
}

/// Root mean squared difference of the normalized histograms. Squared terms
/// are summed in ascending order, so relabelling slots never changes a bit.
inline double rmse(CountSpan f_train, CountSpan f_infer, std::uint64_t n_train, std::uint64_t n_infer) {
  detail::check_pair(f_train, f_infer, n_train, n_infer);
  auto p = detail::normalized(f_train, n_train);
  auto q = detail::normalized(f_infer, n_infer);
  std::vector<double> sq(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) sq[i] = (p[i] - q[i]) * (p[i] - q[i]);
  std::sort(sq.begin(), sq.end());
  double ss = 0;
  for (double v : sq) ss += v;
  return std::sqrt(ss / static_cast<double>(p.size()));
}

/// 1-D earth mover's distance over an ordered support.
inline double wasserstein1d(CountSpan f_train, CountSpan f_infer, std::uint64_t n_train, std::uint64_t n_infer,
                            std::span<const double> positions) {
  detail::check_pair(f_train, f_infer, n_train, n_infer);
  if (positions.size() != f_train.size()) throw InvalidInput("positions length does not match histograms");
  for (std::size_t i = 1; i < positions.size(); ++i) {
    if (!(positions[i] > positions[i - 1])) throw InvalidInput("positions must be strictly ascending");
  }
  const double nt = static_cast<double>(n_train), ni = static_cast<double>(n_infer);
  std::uint64_t cum_t = 0, cum_i = 0;
  double dist = 0;
  for (std::size_t i = 0; i + 1 < positions.size(); ++i) {
    cum_t += f_train[i];
    cum_i += f_infer[i];
    dist += std::abs(static_cast<double>(cum_t) / nt - static_cast<double>(cum_i) / ni) *
            (positions[i + 1] - positions[i]);
  }
  return dist;
}

enum class Metric { similarity, kl, rmse, wasserstein };

inline const char* to_string(Metric m) {
  switch (m) {
    case Metric::similarity: return "similarity";
    case Metric::kl: return "kl";
    case Metric::rmse: return "rmse";
    case Metric::wasserstein: return "wasserstein";
  }
  return "?";
}

inline Metric parse_metric(std::string_view s) {
  if (s == "similarity") return Metric::similarity;
  if (s == "kl") return Metric::kl;
  if (s == "rmse") return Metric::rmse;
  if (s == "wasserstein") return Metric::wasserstein;
  throw InvalidInput("unknown metric '" + std::string(s) + "'");
}

inline constexpr Metric kAllMetrics[] = {Metric::similarity, Metric::kl, Metric::rmse, Metric::wasserstein};

struct FeatureScore {
  std::string name;
  double similarity_raw = 0;
  double similarity = 0;
  double kl = 0;
  double rmse = 0;
  double wasserstein = 0;

  double get(Metric m) const {
    switch (m) {
      case Metric::similarity: return similarity;
      case Metric::kl: return kl;
      case Metric::rmse: return rmse;
      case Metric::wasserstein: return wasserstein;
    }
    return 0;
  }

  bool operator==(const FeatureScore&) const = default;
};

struct MetricValues {
  double similarity = 0;
  double kl = 0;
  double rmse = 0;
  double wasserstein = 0;

  double get(Metric m) const {
    switch (m) {
      case Metric::similarity: return similarity;
      case Metric::kl: return kl;
      case Metric::rmse: return rmse;
      case Metric::wasserstein: return wasserstein;
    }
    return 0;
  }

  bool operator==(const MetricValues&) const = default;
};

struct HealthScore {
  std::vector<FeatureScore> features;
  MetricValues aggregate;
  std::vector<std::string> selected;

  const FeatureScore& feature(std::string_view name) const {
    for (const auto& f : features) {
      if (f.name == name) return f;
    }
    throw NotFound("no score for feature '" + std::string(name) + "'");
  }

  bool operator==(const HealthScore&) const = default;
};

inline FeatureScore score_feature(const ProfileFeature& train, const BatchFeature& batch, std::uint64_t n_train,
                                  std::uint64_t n_infer) {
  if (train.schema.name() != batch.name) {
    throw InvalidInput("feature mismatch: '" + train.schema.name() + "' vs '" + batch.name + "'");
  }
  if (total(train.freq) == 0) throw InvalidInput("profile feature '" + batch.name + "' was never observed");
  auto sim = similarity(train.freq, batch.freq, n_train, n_infer);
  auto pos = train.schema.positions();
  FeatureScore s;
  s.name = batch.name;
  s.similarity_raw = sim.raw;
  s.similarity = sim.clipped;
  s.kl = kl_divergence(train.freq, batch.freq, n_train, n_infer);
  s.rmse = rmse(train.freq, batch.freq, n_train, n_infer);
  s.wasserstein = wasserstein1d(train.freq, batch.freq, n_train, n_infer, pos);
  return s;
}

inline std::size_t default_top_k(std::size_t n_features) { return std::min(kDefaultTopK, n_features); }

/// Unweighted mean of each metric over the k most important features (ties by
/// name). Infinite KL propagates.
inline HealthScore aggregate(std::vector<FeatureScore> scores, std::span<const double> importances, std::size_t k) {
  if (scores.empty()) throw InvalidInput("no feature scores to aggregate");
  if (k == 0) throw InvalidInput("top-k must be at least 1");
  if (k > scores.size()) throw InvalidInput("top-k exceeds feature count");
  if (importances.size() != scores.size()) throw InvalidInput("importances not aligned with scores");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (importances[a] != importances[b]) return importances[a] > importances[b];
    return scores[a].name < scores[b].name;
  });
  HealthScore h;
  double sums[4] = {0, 0, 0, 0};
  for (std::size_t i = 0; i < k; ++i) {
    const auto& s = scores[order[i]];
    h.selected.push_back(s.name);
    for (std::size_t m = 0; m < 4; ++m) sums[m] += s.get(kAllMetrics[m]);
  }
  const double kk = static_cast<double>(k);
  h.aggregate = {sums[0] / kk, sums[1] / kk, sums[2] / kk, sums[3] / kk};
  h.features = std::move(scores);
  return h;
}

/// Scores every feature of an aligned batch and aggregates over top-k.
inline HealthScore score(const TrainingProfile& profile, const InferenceBatchStats& batch, std::size_t k) {
  validate(batch, profile);
  std::vector<FeatureScore> scores;
  scores.reserve(profile.features.size());
  for (std::size_t i = 0; i < profile.features.size(); ++i) {
    scores.push_back(score_feature(profile.features[i], batch.features[i], profile.n_train, batch.n_infer));
  }
  return aggregate(std::move(scores), profile.importances(), std::min(k, profile.features.size()));
}

inline HealthScore score(const TrainingProfile& profile, const InferenceBatchStats& batch) {
  return score(profile, batch, default_top_k(profile.features.size()));
}

// JSON ----------------------------------------------------------------------

/// Non-finite values travel as strings ("inf").
inline json number_to_json(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return v;
}

inline double number_from_json(const json& j) {
  if (j.is_string()) {
    auto s = j.get<std::string>();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw InvalidInput("expected a number, got \"" + s + "\"");
  }
  return j.get<double>();
}

inline json to_json(const MetricValues& m) {
  return {{"similarity", number_to_json(m.similarity)},
          {"kl", number_to_json(m.kl)},
          {"rmse", number_to_json(m.rmse)},
          {"wasserstein", number_to_json(m.wasserstein)}};
}

inline json to_json(const HealthScore& h) {
  json feats = json::array();
  for (const auto& f : h.features) {
    feats.push_back({{"name", f.name},
                     {"similarity_raw", number_to_json(f.similarity_raw)},
                     {"similarity", number_to_json(f.similarity)},
                     {"kl", number_to_json(f.kl)},
                     {"rmse", number_to_json(f.rmse)},
                     {"wasserstein", number_to_json(f.wasserstein)}});
  }
  return {{"features", std::move(feats)}, {"aggregate", to_json(h.aggregate)}, {"selected", h.selected}};
}

inline HealthScore health_score_from_json(const json& j) {
  return detail::parse_guarded("health score", [&] {
    HealthScore h;
    for (const auto& fj : j.at("features")) {
      FeatureScore f;
      f.name = fj.at("name").get<std::string>();
      f.similarity_raw = number_from_json(fj.at("similarity_raw"));
      f.similarity = number_from_json(fj.at("similarity"));
      f.kl = number_from_json(fj.at("kl"));
      f.rmse = number_from_json(fj.at("rmse"));
      f.wasserstein = number_from_json(fj.at("wasserstein"));
      h.features.push_back(std::move(f));
    }
    const auto& a = j.at("aggregate");
    h.aggregate = {number_from_json(a.at("similarity")), number_from_json(a.at("kl")), number_from_json(a.at("rmse")),
                   number_from_json(a.at("wasserstein"))};
    h.selected = j.at("selected").get<std::vector<std::string>>();
    return h;
  });
}

}  // namespace mlhealth
