#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "mlhealth/error.hpp"
#include "mlhealth/metrics.hpp"
#include "mlhealth/monitor.hpp"
#include "mlhealth/profile.hpp"
#include "mlhealth/store.hpp"

namespace mlhealth::gateway {

enum class StatCategory { time_series, value, data_distribution };

inline const char* to_string(StatCategory c) {
  switch (c) {
    case StatCategory::time_series: return "time_series";
    case StatCategory::value: return "value";
    case StatCategory::data_distribution: return "data_distribution";
  }
  return "?";
}

inline StatCategory parse_stat_category(std::string_view s) {
  if (s == "time_series") return StatCategory::time_series;
  if (s == "value") return StatCategory::value;
  if (s == "data_distribution") return StatCategory::data_distribution;
  throw InvalidInput("unknown stat category '" + std::string(s) + "'");
}

struct StatRecord {
  std::uint64_t seq = 0;
  std::string pipeline_id;
  std::string name;
  StatCategory category = StatCategory::value;
  json payload;
  TimestampMs timestamp = 0;

  bool operator==(const StatRecord&) const = default;
};

struct ModelRecord {
  std::string model_id;
  TimestampMs created_at = 0;
  TimestampMs updated_at = 0;
  std::uint64_t profile_seq = 0;  // log entry holding the active profile
  json annotations = json::object();

  bool operator==(const ModelRecord&) const = default;
};

struct StoredReport {
  std::uint64_t seq = 0;
  TimestampMs timestamp = 0;
  HealthReport report;
};

struct StoredAlert {
  std::uint64_t seq = 0;
  AlertRecord alert;
};

inline json to_json(const StatRecord& s) {
  return {{"seq", s.seq},
          {"pipeline_id", s.pipeline_id},
          {"name", s.name},
          {"category", to_string(s.category)},
          {"payload", s.payload},
          {"timestamp", s.timestamp}};
}

inline json to_json(const ModelRecord& m) {
  return {{"model_id", m.model_id},
          {"created_at", m.created_at},
          {"updated_at", m.updated_at},
          {"profile_seq", m.profile_seq},
          {"annotations", m.annotations}};
}

inline ModelRecord model_from_json(const json& j) {
  return detail::parse_guarded("model record", [&] {
    ModelRecord m;
    m.model_id = j.at("model_id").get<std::string>();
    m.created_at = j.at("created_at").get<TimestampMs>();
    m.updated_at = j.value("updated_at", m.created_at);
    m.profile_seq = j.value("profile_seq", std::uint64_t{0});
    m.annotations = j.value("annotations", json::object());
    return m;
  });
}

/// In-memory state rebuilt purely from log entries.
class GatewayState {
 public:
  void apply(const LogEntry& e) {
    const json& r = e.record;
    TimestampMs ts = r.at("timestamp").get<TimestampMs>();
    if (e.kind == "stat") {
      stats_.push_back({e.seq, r.at("pipeline_id").get<std::string>(), r.at("name").get<std::string>(),
                        parse_stat_category(r.at("category").get<std::string>()), r.at("payload"), ts});
    } else if (e.kind == "profile") {
      apply_profile(e.seq, r, ts);
    } else if (e.kind == "report") {
      const auto m = r.at("model_id").get<std::string>();
      auto report = report_from_json(r.at("report"));
      monitor(m).observe(m, report.batch_id, ts, report.score);
      if (report.alert) alerts_.push_back({e.seq, *report.alert});
      reports_[m].push_back({e.seq, ts, std::move(report)});
    } else if (e.kind == "alert") {
      alerts_.push_back({e.seq, alert_from_json(r.at("alert"))});
    } else if (e.kind == "policy") {
      monitor(r.at("model_id").get<std::string>()).set_policy(policy_from_json(r.at("policy")));
    } else {
      throw InvalidInput("unknown record kind '" + e.kind + "'");
    }
    last_seq_ = e.seq;
    last_timestamp_ = std::max(last_timestamp_, ts);
  }

  const std::vector<StatRecord>& stats() const { return stats_; }
  const std::map<std::string, ModelRecord>& models() const { return models_; }
  const std::vector<StoredAlert>& alerts() const { return alerts_; }
  std::uint64_t last_seq() const { return last_seq_; }
  TimestampMs last_timestamp() const { return last_timestamp_; }

  const TrainingProfile* profile(const std::string& model_id) const {
    auto it = profiles_.find(model_id);
    return it == profiles_.end() ? nullptr : &it->second;
  }

  const Monitor* find_monitor(const std::string& model_id) const {
    auto it = monitors_.find(model_id);
    return it == monitors_.end() ? nullptr : &it->second;
  }

  const std::vector<StoredReport>& reports(const std::string& model_id) const {
    static const std::vector<StoredReport> none;
    auto it = reports_.find(model_id);
    return it == reports_.end() ? none : it->second;
  }

  std::optional<std::string> current_model(const std::string& pipeline_id) const {
    auto it = pipelines_.find(pipeline_id);
    if (it == pipelines_.end()) return std::nullopt;
    return it->second;
  }

  /// Canonical dump of everything observable; equal states dump equal.
  json snapshot() const {
    json j;
    j["last_seq"] = last_seq_;
    j["stats"] = json::array();
    for (const auto& s : stats_) j["stats"].push_back(to_json(s));
    j["models"] = json::array();
    for (const auto& [id, m] : models_) {
      json mj = to_json(m);
      mj["profile"] = to_json(profiles_.at(id));
      const auto& mon = monitors_.at(id);
      mj["policy"] = to_json(mon.policy());
      mj["history_size"] = mon.history().size();
      mj["reports"] = json::array();
      for (const auto& r : reports(id)) {
        mj["reports"].push_back({{"seq", r.seq}, {"timestamp", r.timestamp}, {"report", to_json(r.report)}});
      }
      j["models"].push_back(std::move(mj));
    }
    j["pipelines"] = pipelines_;
    j["alerts"] = json::array();
    for (const auto& a : alerts_) j["alerts"].push_back({{"seq", a.seq}, {"alert", to_json(a.alert)}});
    return j;
  }

 private:
  Monitor& monitor(const std::string& model_id) {
    auto it = monitors_.find(model_id);
    if (it == monitors_.end()) throw NotFound("no monitor for model '" + model_id + "'");
    return it->second;
  }

  void apply_profile(std::uint64_t seq, const json& r, TimestampMs ts) {
    auto profile = profile_from_json(r.at("profile"));
    const std::string id = profile.model_id;
    AlertPolicy policy = default_policy();
    if (r.contains("policy")) {
      policy = policy_from_json(r.at("policy"));
    } else if (auto it = monitors_.find(id); it != monitors_.end()) {
      policy = it->second.policy();
    }
    // A new reference profile restarts the score history.
    if (policy.auto_threshold) policy.threshold.reset();
    monitors_.insert_or_assign(id, Monitor(policy));

    auto [it, fresh] = models_.try_emplace(id);
    ModelRecord& m = it->second;
    if (fresh) {
      m.model_id = id;
      m.created_at = profile.created_at != 0 ? profile.created_at : ts;
    }
    m.updated_at = ts;
    m.profile_seq = seq;
    if (r.contains("annotations")) m.annotations = r.at("annotations");
    profiles_.insert_or_assign(id, std::move(profile));
    if (auto p = r.value("pipeline_id", std::string{}); !p.empty()) pipelines_[p] = id;
  }

  std::vector<StatRecord> stats_;
  std::map<std::string, ModelRecord> models_;
  std::map<std::string, TrainingProfile> profiles_;
  std::map<std::string, Monitor> monitors_;
  std::map<std::string, std::vector<StoredReport>> reports_;
  std::map<std::string, std::string> pipelines_;
  std::vector<StoredAlert> alerts_;
  std::uint64_t last_seq_ = 0;
  TimestampMs last_timestamp_ = 0;
};

inline TimestampMs wall_clock_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

struct GatewayOptions {
  std::function<TimestampMs()> clock = wall_clock_ms;
  std::function<void(const std::string&)> warn = [](const std::string& msg) { std::cerr << "warning: " << msg << "\n"; };
};

struct TimeRange {
  TimestampMs start = std::numeric_limits<TimestampMs>::min();
  TimestampMs end = std::numeric_limits<TimestampMs>::max();
};

/// The stats service. Writes are serialized through one lock and reach the
/// log before the in-memory state; reads share the lock.
class Gateway {
 public:
  explicit Gateway(const std::string& store_path, GatewayOptions opts = {}) : opts_(std::move(opts)) {
    auto rec = StoreLog::read(store_path);
    for (const auto& w : rec.warnings) {
      opts_.warn(w);
      warnings_.push_back(w);
    }
    for (const auto& e : rec.entries) {
      try {
        state_.apply(e);
      } catch (const Error& err) {
        throw StoreError("cannot replay record " + std::to_string(e.seq) + ": " + err.what());
      } catch (const json::exception& err) {
        throw StoreError("cannot replay record " + std::to_string(e.seq) + ": " + err.what());
      }
    }
    log_ = std::make_unique<StoreLog>(store_path, state_.last_seq(), rec.valid_bytes);
  }

  const std::vector<std::string>& recovery_warnings() const { return warnings_; }

  // Writes -------------------------------------------------------------------

  /// Body: {name, payload?, category?, pipeline_id?, timestamp?}.
  std::uint64_t set_stat(const json& body) {
    json rec = detail::parse_guarded("stat", [&] {
      if (!body.is_object()) throw InvalidInput("stat body must be a JSON object");
      auto name = body.at("name").get<std::string>();
      if (name.empty()) throw InvalidInput("stat name must not be empty");
      auto category = body.value("category", std::string("value"));
      parse_stat_category(category);
      return json{{"pipeline_id", body.value("pipeline_id", std::string{})},
                  {"name", name},
                  {"category", category},
                  {"payload", body.contains("payload") ? body.at("payload") : json(nullptr)}};
    });
    std::unique_lock lock(mu_);
    rec["timestamp"] = client_or_server_ts(body);
    return commit("stat", std::move(rec));
  }

  struct DistributionAck {
    std::uint64_t seq = 0;
    std::optional<ModelRecord> model;    // training upload
    std::optional<HealthReport> report;  // inference batch
  };

  /// A training profile (has n_train) or an inference batch (has n_infer).
  DistributionAck set_distribution(const std::string& model_id, json body, const std::string& pipeline_id = {},
                                   std::optional<std::size_t> top_k = std::nullopt) {
    if (model_id.empty()) throw InvalidInput("model id must not be empty");
    if (!body.is_object()) throw InvalidInput("distribution body must be a JSON object");
    if (body.contains("model_id") && body["model_id"] != model_id) {
      throw InvalidInput("body model_id does not match the request path");
    }
    body["model_id"] = model_id;
    if (body.contains("n_train")) return register_profile(model_id, body, pipeline_id);
    if (body.contains("n_infer")) return score_batch(model_id, body, top_k);
    throw InvalidInput("distribution body is neither a training profile nor an inference batch");
  }

  /// Body: {title, description?, payload?, severity?, model_id?, batch_id?, timestamp?}.
  std::uint64_t health_alert(const json& body) {
    AlertRecord a = detail::parse_guarded("alert", [&] {
      if (!body.is_object()) throw InvalidInput("alert body must be a JSON object");
      AlertRecord out;
      out.title = body.at("title").get<std::string>();
      if (out.title.empty()) throw InvalidInput("alert title must not be empty");
      out.description = body.value("description", std::string{});
      out.payload = body.contains("payload") ? body.at("payload") : json::object();
      out.severity = parse_severity(body.value("severity", std::string("warning")));
      out.model_id = body.value("model_id", std::string{});
      out.batch_id = body.value("batch_id", std::string{});
      out.source = "external";
      return out;
    });
    std::unique_lock lock(mu_);
    a.timestamp = client_or_server_ts(body);
    return commit("alert", {{"timestamp", a.timestamp}, {"alert", to_json(a)}});
  }

  /// Body: a full policy, or {threshold} to adjust the active one.
  AlertPolicy set_policy(const std::string& model_id, const json& body) {
    std::unique_lock lock(mu_);
    const Monitor* mon = state_.find_monitor(model_id);
    if (!mon) throw NotFound("no model '" + model_id + "'");
    TimestampMs ts = next_server_ts();
    AlertPolicy p = detail::parse_guarded("policy", [&] {
      if (body.is_object() && body.size() == 1 && body.contains("threshold")) {
        return manual_threshold_update(mon->policy(), number_from_json(body.at("threshold")), ts);
      }
      auto out = policy_from_json(body);
      out.updated_at = ts;
      return out;
    });
    validate(p);
    commit("policy", {{"timestamp", ts}, {"model_id", model_id}, {"policy", to_json(p)}});
    return state_.find_monitor(model_id)->policy();
  }

  // Reads --------------------------------------------------------------------

  struct StatFilter {
    std::optional<std::string> name;
    std::optional<std::string> pipeline_id;
    TimeRange range;
  };

  std::vector<StatRecord> stats(const StatFilter& f = {}) const {
    std::shared_lock lock(mu_);
    std::vector<StatRecord> out;
    for (const auto& s : state_.stats()) {
      if (f.name && s.name != *f.name) continue;
      if (f.pipeline_id && s.pipeline_id != *f.pipeline_id) continue;
      if (s.timestamp < f.range.start || s.timestamp > f.range.end) continue;
      out.push_back(s);
    }
    return out;
  }

  std::vector<AlertRecord> alerts(TimestampMs since = std::numeric_limits<TimestampMs>::min(),
                                  const std::optional<std::string>& model_id = std::nullopt) const {
    std::shared_lock lock(mu_);
    std::vector<AlertRecord> out;
    for (const auto& a : state_.alerts()) {
      if (a.alert.timestamp < since) continue;
      if (model_id && a.alert.model_id != *model_id) continue;
      out.push_back(a.alert);
    }
    return out;
  }

  /// Models created in [start, end], oldest first.
  std::vector<ModelRecord> models(TimeRange range = {}) const {
    if (range.start > range.end) throw InvalidInput("start must not exceed end");
    std::shared_lock lock(mu_);
    std::vector<ModelRecord> out;
    for (const auto& [id, m] : state_.models()) {
      if (m.created_at >= range.start && m.created_at <= range.end) out.push_back(m);
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.created_at < b.created_at; });
    return out;
  }

  ModelRecord current_model(const std::string& pipeline_id) const {
    std::shared_lock lock(mu_);
    auto id = state_.current_model(pipeline_id);
    if (!id) throw NotFound("no model associated with pipeline '" + pipeline_id + "'");
    return state_.models().at(*id);
  }

  std::vector<HealthReport> health_reports(const std::string& model_id) const {
    std::shared_lock lock(mu_);
    if (!state_.profile(model_id)) throw NotFound("no model '" + model_id + "'");
    std::vector<HealthReport> out;
    for (const auto& r : state_.reports(model_id)) out.push_back(r.report);
    return out;
  }

  TrainingProfile profile(const std::string& model_id) const {
    std::shared_lock lock(mu_);
    const auto* p = state_.profile(model_id);
    if (!p) throw NotFound("no training profile registered for model '" + model_id + "'");
    return *p;
  }

  AlertPolicy policy(const std::string& model_id) const {
    std::shared_lock lock(mu_);
    const auto* m = state_.find_monitor(model_id);
    if (!m) throw NotFound("no model '" + model_id + "'");
    return m->policy();
  }

  json snapshot() const {
    std::shared_lock lock(mu_);
    return state_.snapshot();
  }

  std::uint64_t last_seq() const {
    std::shared_lock lock(mu_);
    return state_.last_seq();
  }

  void flush() { log_->flush(); }

 private:
  DistributionAck register_profile(const std::string& model_id, const json& body, const std::string& pipeline_id) {
    json payload = body;
    std::optional<json> policy;
    std::optional<json> annotations;
    if (payload.contains("policy")) {
      policy = payload["policy"];
      payload.erase("policy");
    }
    if (payload.contains("annotations")) {
      annotations = payload["annotations"];
      payload.erase("annotations");
    }
    auto profile = profile_from_json(payload);
    validate(profile);
    if (policy) validate(policy_from_json(*policy));

    std::unique_lock lock(mu_);
    json rec{{"timestamp", next_server_ts()}, {"model_id", model_id}, {"profile", to_json(profile)}};
    if (!pipeline_id.empty()) rec["pipeline_id"] = pipeline_id;
    if (policy) rec["policy"] = *policy;
    if (annotations) rec["annotations"] = *annotations;
    DistributionAck ack;
    ack.seq = commit("profile", std::move(rec));
    ack.model = state_.models().at(model_id);
    return ack;
  }

  DistributionAck score_batch(const std::string& model_id, const json& body, std::optional<std::size_t> top_k) {
    auto batch = batch_from_json(body);
    std::unique_lock lock(mu_);
    const auto* profile = state_.profile(model_id);
    if (!profile) throw NotFound("no training profile registered for model '" + model_id + "'");
    validate(batch, *profile);
    TimestampMs ts = batch.timestamp != 0 ? batch.timestamp : next_server_ts();
    batch.timestamp = ts;
    const std::size_t k = top_k.value_or(default_top_k(profile->features.size()));
    if (k == 0 || k > profile->features.size()) throw InvalidInput("top-k out of range");

    HealthReport report;
    report.model_id = model_id;
    report.batch_id = batch.batch_id;
    report.score = score(*profile, batch, k);
    Monitor trial = *state_.find_monitor(model_id);
    report.alert = trial.observe(model_id, batch.batch_id, ts, report.score);

    DistributionAck ack;
    ack.seq = commit("report", {{"timestamp", ts}, {"model_id", model_id}, {"report", to_json(report)}});
    ack.report = std::move(report);
    return ack;
  }

  // Caller holds the unique lock.
  std::uint64_t commit(const std::string& kind, json record) {
    std::uint64_t seq = log_->append(kind, record);
    state_.apply({seq, kind, std::move(record)});
    return seq;
  }

  TimestampMs next_server_ts() {
    last_assigned_ = std::max({opts_.clock(), last_assigned_, state_.last_timestamp()});
    return last_assigned_;
  }

  TimestampMs client_or_server_ts(const json& body) {
    if (body.contains("timestamp") && !body.at("timestamp").is_null()) {
      return detail::parse_guarded("timestamp", [&] { return body.at("timestamp").get<TimestampMs>(); });
    }
    return next_server_ts();
  }

  GatewayOptions opts_;
  std::vector<std::string> warnings_;
  GatewayState state_;
  std::unique_ptr<StoreLog> log_;
  TimestampMs last_assigned_ = 0;
  mutable std::shared_mutex mu_;
};

/// Parses an integer query value; throws InvalidInput when malformed.
inline std::int64_t parse_int_param(const std::string& name, const std::string& text) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || p != text.data() + text.size()) {
    throw InvalidInput("query parameter '" + name + "' must be an integer");
  }
  return v;
}

}  // namespace mlhealth::gateway
