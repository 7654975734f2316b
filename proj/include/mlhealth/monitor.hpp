#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mlhealth/error.hpp"
#include "mlhealth/metrics.hpp"
#include "mlhealth/profile.hpp"

namespace mlhealth {

enum class Scope { aggregate, per_feature, feature_group };
enum class Direction { below, above };
enum class Severity { warning, critical };

inline const char* to_string(Scope s) {
  switch (s) {
    case Scope::aggregate: return "aggregate";
    case Scope::per_feature: return "per_feature";
    case Scope::feature_group: return "feature_group";
  }
  return "?";
}
inline const char* to_string(Direction d) { return d == Direction::below ? "below" : "above"; }
inline const char* to_string(Severity s) { return s == Severity::warning ? "warning" : "critical"; }

inline Scope parse_scope(std::string_view s) {
  if (s == "aggregate") return Scope::aggregate;
  if (s == "per_feature") return Scope::per_feature;
  if (s == "feature_group") return Scope::feature_group;
  throw InvalidInput("unknown scope '" + std::string(s) + "'");
}

inline Severity parse_severity(std::string_view s) {
  if (s == "warning") return Severity::warning;
  if (s == "critical") return Severity::critical;
  throw InvalidInput("unknown severity '" + std::string(s) + "'");
}

/// Similarity alerts when it drops; the divergences alert when they rise.
inline Direction direction_for(Metric m) { return m == Metric::similarity ? Direction::below : Direction::above; }

inline constexpr double kDefaultEpsilon = 0.05;
inline constexpr std::size_t kDefaultWarmup = 3;
inline constexpr double kDefaultSimilarityThreshold = 0.8;

struct AlertPolicy {
  Scope scope = Scope::aggregate;
  std::vector<std::string> group;  // feature_group scope only
  Metric metric = Metric::similarity;
  Direction direction = Direction::below;
  std::optional<double> threshold;  // unset until auto-configured
  bool auto_threshold = false;
  double epsilon = kDefaultEpsilon;
  std::size_t warmup_runs = kDefaultWarmup;
  TimestampMs updated_at = 0;

  bool operator==(const AlertPolicy&) const = default;
};

inline void validate(const AlertPolicy& p) {
  if (p.direction != direction_for(p.metric)) {
    throw InvalidInput(std::string("metric ") + to_string(p.metric) + " requires direction " +
                       to_string(direction_for(p.metric)));
  }
  if (!(p.epsilon > 0) || !std::isfinite(p.epsilon)) throw InvalidInput("epsilon must be positive");
  if (p.warmup_runs < 1) throw InvalidInput("warmup_runs must be at least 1");
  if (p.scope == Scope::feature_group && p.group.empty()) throw InvalidInput("feature_group scope needs feature names");
  if (!p.auto_threshold && !p.threshold) throw InvalidInput("fixed policy needs a threshold");
  if (p.threshold && std::isnan(*p.threshold)) throw InvalidInput("threshold is NaN");
}

inline AlertPolicy fixed_policy(Metric metric, double threshold, Scope scope = Scope::aggregate) {
  AlertPolicy p;
  p.metric = metric;
  p.direction = direction_for(metric);
  p.threshold = threshold;
  p.scope = scope;
  validate(p);
  return p;
}

inline AlertPolicy auto_policy(Metric metric, double epsilon = kDefaultEpsilon, std::size_t warmup = kDefaultWarmup,
                               Scope scope = Scope::aggregate) {
  AlertPolicy p;
  p.metric = metric;
  p.direction = direction_for(metric);
  p.auto_threshold = true;
  p.epsilon = epsilon;
  p.warmup_runs = warmup;
  p.scope = scope;
  validate(p);
  return p;
}

inline AlertPolicy default_policy() { return fixed_policy(Metric::similarity, kDefaultSimilarityThreshold); }

struct Violation {
  std::string feature;  // "aggregate" for aggregate scope
  double value = 0;

  bool operator==(const Violation&) const = default;
};

/// Internally generated (threshold) or externally reported alert.
struct AlertRecord {
  std::string title;
  std::string description;
  Severity severity = Severity::warning;
  std::string source = "internal";
  std::optional<Metric> metric;
  double value = 0;
  double threshold = 0;
  Direction direction = Direction::below;
  std::vector<Violation> violators;
  std::string model_id;
  std::string batch_id;
  TimestampMs timestamp = 0;
  json payload;  // external alerts only

  bool operator==(const AlertRecord&) const = default;
};

struct HistoryEntry {
  std::string batch_id;
  TimestampMs timestamp = 0;
  HealthScore score;

  bool operator==(const HistoryEntry&) const = default;
};

/// Ordered per-model score history; timestamps never decrease.
class ScoreHistory {
 public:
  void append(HistoryEntry e) {
    if (!entries_.empty() && e.timestamp < entries_.back().timestamp) {
      throw InvalidInput("score history timestamps must be non-decreasing");
    }
    entries_.push_back(std::move(e));
  }
  const std::vector<HistoryEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

 private:
  std::vector<HistoryEntry> entries_;
};

/// The (feature, value) pairs a policy watches.
inline std::vector<Violation> scoped_values(const HealthScore& score, const AlertPolicy& policy) {
  std::vector<Violation> out;
  switch (policy.scope) {
    case Scope::aggregate:
      out.push_back({"aggregate", score.aggregate.get(policy.metric)});
      break;
    case Scope::per_feature:
      for (const auto& name : score.selected) out.push_back({name, score.feature(name).get(policy.metric)});
      break;
    case Scope::feature_group:
      for (const auto& name : policy.group) out.push_back({name, score.feature(name).get(policy.metric)});
      break;
  }
  return out;
}

inline bool violates(double value, double threshold, Direction d) {
  return d == Direction::below ? value < threshold : value > threshold;
}

/// Pure: the alert (if any) for one score under one policy. One alert lists
/// every violating feature; the worst violator determines value and severity.
inline std::optional<AlertRecord> evaluate(const HealthScore& score, const AlertPolicy& policy,
                                           const std::string& model_id, const std::string& batch_id,
                                           TimestampMs timestamp) {
  if (!policy.threshold) return std::nullopt;
  const double threshold = *policy.threshold;
  std::vector<Violation> violators;
  for (auto& v : scoped_values(score, policy)) {
    if (violates(v.value, threshold, policy.direction)) violators.push_back(std::move(v));
  }
  if (violators.empty()) return std::nullopt;
  auto worst = std::min_element(violators.begin(), violators.end(), [&](const auto& a, const auto& b) {
    return policy.direction == Direction::below ? a.value < b.value : a.value > b.value;
  });
  AlertRecord a;
  a.metric = policy.metric;
  a.value = worst->value;
  a.threshold = threshold;
  a.direction = policy.direction;
  double margin = policy.direction == Direction::below ? threshold - a.value : a.value - threshold;
  a.severity = margin >= policy.epsilon ? Severity::critical : Severity::warning;
  a.title = std::string(to_string(policy.metric)) + (policy.direction == Direction::below ? " below " : " above ") +
            "threshold";
  std::ostringstream desc;
  desc << "model '" << model_id << "' batch '" << batch_id << "': " << violators.size() << " of "
       << scoped_values(score, policy).size() << ' ' << to_string(policy.scope) << " value(s) "
       << (policy.direction == Direction::below ? "< " : "> ") << number_to_json(threshold).dump() << "; worst "
       << worst->feature << '=' << number_to_json(worst->value).dump();
  a.description = desc.str();
  a.violators = std::move(violators);
  a.model_id = model_id;
  a.batch_id = batch_id;
  a.timestamp = timestamp;
  return a;
}

/// Threshold from the first `warmup_runs` entries: min - eps for metrics that
/// alert below, max + eps for metrics that alert above.
inline AlertPolicy auto_threshold(const ScoreHistory& history, AlertPolicy policy) {
  if (history.size() < policy.warmup_runs) {
    throw InvalidInput("auto threshold needs " + std::to_string(policy.warmup_runs) + " runs, history has " +
                       std::to_string(history.size()));
  }
  bool below = policy.direction == Direction::below;
  double extreme = below ? kInf : -kInf;
  for (std::size_t i = 0; i < policy.warmup_runs; ++i) {
    for (const auto& v : scoped_values(history.entries()[i].score, policy)) {
      extreme = below ? std::min(extreme, v.value) : std::max(extreme, v.value);
    }
  }
  policy.threshold = below ? extreme - policy.epsilon : extreme + policy.epsilon;
  return policy;
}

inline AlertPolicy manual_threshold_update(AlertPolicy policy, double new_threshold, TimestampMs now) {
  if (!std::isfinite(new_threshold)) throw InvalidInput("threshold must be finite");
  policy.threshold = new_threshold;
  policy.updated_at = now;
  return policy;
}

struct HealthReport {
  std::string model_id;
  std::string batch_id;
  HealthScore score;
  std::optional<AlertRecord> alert;

  bool operator==(const HealthReport&) const = default;
};

/// Scores one batch and applies a policy whose threshold is already known.
inline HealthReport evaluate_batch(const TrainingProfile& profile, const InferenceBatchStats& batch,
                                   const AlertPolicy& policy, std::size_t k) {
  HealthReport r;
  r.model_id = profile.model_id;
  r.batch_id = batch.batch_id;
  r.score = score(profile, batch, k);
  r.alert = evaluate(r.score, policy, profile.model_id, batch.batch_id, batch.timestamp);
  return r;
}

/// Stateful policy + history for one model. Auto policies stay silent until
/// the warmup window is full, then freeze their threshold. Not thread-safe.
class Monitor {
 public:
  explicit Monitor(AlertPolicy policy) : policy_(std::move(policy)) { validate(policy_); }

  const AlertPolicy& policy() const { return policy_; }
  const ScoreHistory& history() const { return history_; }

  void set_policy(AlertPolicy p) {
    validate(p);
    policy_ = std::move(p);
    maybe_configure();
  }

  std::optional<AlertRecord> observe(const std::string& model_id, const std::string& batch_id, TimestampMs ts,
                                     const HealthScore& score) {
    history_.append({batch_id, ts, score});
    if (!policy_.threshold) {
      maybe_configure();
      return std::nullopt;
    }
    return evaluate(score, policy_, model_id, batch_id, ts);
  }

 private:
  void maybe_configure() {
    if (policy_.auto_threshold && !policy_.threshold && history_.size() >= policy_.warmup_runs) {
      policy_ = auto_threshold(history_, policy_);
    }
  }

  AlertPolicy policy_;
  ScoreHistory history_;
};

// JSON ----------------------------------------------------------------------

inline json to_json(const AlertPolicy& p) {
  json j{{"scope", to_string(p.scope)},
         {"metric", to_string(p.metric)},
         {"direction", to_string(p.direction)},
         {"auto", p.auto_threshold},
         {"epsilon", p.epsilon},
         {"warmup_runs", p.warmup_runs},
         {"updated_at", p.updated_at}};
  j["threshold"] = p.threshold ? number_to_json(*p.threshold) : json(nullptr);
  if (p.scope == Scope::feature_group) j["group"] = p.group;
  return j;
}

inline AlertPolicy policy_from_json(const json& j) {
  return detail::parse_guarded("policy", [&] {
    AlertPolicy p;
    p.metric = parse_metric(j.value("metric", std::string("similarity")));
    p.direction = direction_for(p.metric);
    if (j.contains("direction")) {
      auto d = j.at("direction").get<std::string>();
      if (d != "below" && d != "above") throw InvalidInput("unknown direction '" + d + "'");
      p.direction = d == "below" ? Direction::below : Direction::above;
    }
    p.scope = parse_scope(j.value("scope", std::string("aggregate")));
    if (j.contains("group")) p.group = j.at("group").get<std::vector<std::string>>();
    p.auto_threshold = j.value("auto", false);
    p.epsilon = j.value("epsilon", kDefaultEpsilon);
    p.warmup_runs = j.value("warmup_runs", kDefaultWarmup);
    p.updated_at = j.value("updated_at", TimestampMs{0});
    if (j.contains("threshold") && !j.at("threshold").is_null()) p.threshold = number_from_json(j.at("threshold"));
    validate(p);
    return p;
  });
}

inline json to_json(const AlertRecord& a) {
  json j{{"title", a.title},         {"description", a.description}, {"severity", to_string(a.severity)},
         {"source", a.source},       {"model_id", a.model_id},       {"batch_id", a.batch_id},
         {"timestamp", a.timestamp}};
  if (a.metric) {
    j["metric"] = to_string(*a.metric);
    j["value"] = number_to_json(a.value);
    j["threshold"] = number_to_json(a.threshold);
    j["direction"] = to_string(a.direction);
    json v = json::array();
    for (const auto& x : a.violators) v.push_back({{"feature", x.feature}, {"value", number_to_json(x.value)}});
    j["violators"] = std::move(v);
  }
  if (!a.payload.is_null()) j["payload"] = a.payload;
  return j;
}

inline AlertRecord alert_from_json(const json& j) {
  return detail::parse_guarded("alert", [&] {
    AlertRecord a;
    a.title = j.at("title").get<std::string>();
    a.description = j.value("description", std::string{});
    a.severity = parse_severity(j.value("severity", std::string("warning")));
    a.source = j.value("source", std::string("internal"));
    a.model_id = j.value("model_id", std::string{});
    a.batch_id = j.value("batch_id", std::string{});
    a.timestamp = j.value("timestamp", TimestampMs{0});
    if (j.contains("metric")) {
      a.metric = parse_metric(j.at("metric").get<std::string>());
      a.value = number_from_json(j.at("value"));
      a.threshold = number_from_json(j.at("threshold"));
      a.direction = j.value("direction", std::string("below")) == "below" ? Direction::below : Direction::above;
      for (const auto& v : j.value("violators", json::array())) {
        a.violators.push_back({v.at("feature").get<std::string>(), number_from_json(v.at("value"))});
      }
    }
    if (j.contains("payload")) a.payload = j.at("payload");
    return a;
  });
}

inline json to_json(const HealthReport& r) {
  return {{"model_id", r.model_id},
          {"batch_id", r.batch_id},
          {"score", to_json(r.score)},
          {"alert", r.alert ? to_json(*r.alert) : json(nullptr)}};
}

inline HealthReport report_from_json(const json& j) {
  return detail::parse_guarded("health report", [&] {
    HealthReport r;
    r.model_id = j.at("model_id").get<std::string>();
    r.batch_id = j.value("batch_id", std::string{});
    r.score = health_score_from_json(j.at("score"));
    if (j.contains("alert") && !j.at("alert").is_null()) r.alert = alert_from_json(j.at("alert"));
    return r;
  });
}

}  // namespace mlhealth
