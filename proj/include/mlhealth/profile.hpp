#pragma once

#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlhealth/error.hpp"
#include "mlhealth/schema.hpp"
#include "mlhealth/table.hpp"

namespace mlhealth {

using json = nlohmann::json;
using Counts = std::vector<std::uint64_t>;

/// Milliseconds since the Unix epoch.
using TimestampMs = std::int64_t;

inline constexpr int kFormatVersion = 1;

struct ProfileFeature {
  FeatureSchema schema;
  Counts freq;
  double importance = 0.0;

  bool operator==(const ProfileFeature&) const = default;
};

/// Training-time reference histograms for one model.
struct TrainingProfile {
  std::string model_id;
  std::vector<ProfileFeature> features;
  std::uint64_t n_train = 0;
  TimestampMs created_at = 0;  // 0 = unset

  const ProfileFeature& feature(std::string_view name) const {
    for (const auto& f : features) {
      if (f.schema.name() == name) return f;
    }
    throw NotFound("profile has no feature '" + std::string(name) + "'");
  }

  std::vector<double> importances() const {
    std::vector<double> out;
    for (const auto& f : features) out.push_back(f.importance);
    return out;
  }

  std::vector<FeatureSchema> schemas() const {
    std::vector<FeatureSchema> out;
    for (const auto& f : features) out.push_back(f.schema);
    return out;
  }

  bool operator==(const TrainingProfile&) const = default;
};

struct BatchFeature {
  std::string name;
  Counts freq;

  bool operator==(const BatchFeature&) const = default;
};

/// Inference histograms for one batch, aligned to a profile's slot order.
struct InferenceBatchStats {
  std::string model_id;
  std::string batch_id;
  TimestampMs timestamp = 0;
  std::uint64_t n_infer = 0;
  std::vector<BatchFeature> features;

  bool operator==(const InferenceBatchStats&) const = default;
};

inline std::uint64_t total(std::span<const std::uint64_t> v) {
  return std::accumulate(v.begin(), v.end(), std::uint64_t{0});
}

/// Normalizes to sum 1; uniform when `raw` is empty.
inline std::vector<double> normalize_importances(std::span<const double> raw, std::size_t n_features) {
  if (raw.empty()) return std::vector<double>(n_features, n_features ? 1.0 / static_cast<double>(n_features) : 0.0);
  if (raw.size() != n_features) {
    throw InvalidInput("expected " + std::to_string(n_features) + " importances, got " + std::to_string(raw.size()));
  }
  double sum = 0;
  for (double v : raw) {
    if (!std::isfinite(v) || v < 0) throw InvalidInput("importances must be finite and non-negative");
    sum += v;
  }
  if (sum <= 0) throw InvalidInput("importances must not all be zero");
  std::vector<double> out(raw.begin(), raw.end());
  for (auto& v : out) v /= sum;
  return out;
}

inline void validate(const TrainingProfile& p) {
  if (p.features.empty()) throw InvalidInput("profile has no features");
  if (p.n_train == 0) throw InvalidInput("profile n_train must be positive");
  std::set<std::string> names;
  double imp = 0;
  for (const auto& f : p.features) {
    const auto& name = f.schema.name();
    if (!names.insert(name).second) throw InvalidInput("duplicate feature '" + name + "' in profile");
    if (f.freq.size() != f.schema.category_count()) {
      throw InvalidInput("feature '" + name + "' has " + std::to_string(f.freq.size()) + " counts, schema expects " +
                         std::to_string(f.schema.category_count()));
    }
    if (total(f.freq) != p.n_train) throw InvalidInput("feature '" + name + "' counts do not sum to n_train");
    if (!(f.importance >= 0 && f.importance <= 1)) throw InvalidInput("feature '" + name + "' importance outside [0,1]");
    imp += f.importance;
  }
  if (std::abs(imp - 1.0) > 1e-9) throw InvalidInput("profile importances do not sum to 1");
}

/// Throws if the batch is not slot-aligned with `p`.
inline void validate(const InferenceBatchStats& b, const TrainingProfile& p) {
  if (b.n_infer == 0) throw InvalidInput("batch n_infer must be positive");
  if (b.features.size() != p.features.size()) {
    throw InvalidInput("batch has " + std::to_string(b.features.size()) + " features, profile has " +
                       std::to_string(p.features.size()));
  }
  for (std::size_t i = 0; i < b.features.size(); ++i) {
    const auto& bf = b.features[i];
    const auto& pf = p.features[i];
    if (bf.name != pf.schema.name()) {
      throw InvalidInput("batch feature " + std::to_string(i) + " is '" + bf.name + "', profile expects '" +
                         pf.schema.name() + "'");
    }
    if (bf.freq.size() != pf.freq.size()) throw InvalidInput("batch feature '" + bf.name + "' has wrong slot count");
    if (total(bf.freq) != b.n_infer) throw InvalidInput("batch feature '" + bf.name + "' counts do not sum to n_infer");
  }
}

inline TrainingProfile build_profile(const DataTable& table, std::span<const FeatureSchema> schemas,
                                     std::string model_id, std::span<const double> importances = {},
                                     TimestampMs created_at = 0) {
  if (table.empty()) throw InvalidInput("cannot build a profile from an empty table");
  if (schemas.empty()) throw InvalidInput("no feature schemas given");
  auto imp = normalize_importances(importances, schemas.size());
  TrainingProfile p;
  p.model_id = std::move(model_id);
  p.n_train = table.num_rows();
  p.created_at = created_at;
  auto codes = encode(table, schemas);
  for (std::size_t f = 0; f < schemas.size(); ++f) {
    ProfileFeature pf{schemas[f], Counts(schemas[f].category_count(), 0), imp[f]};
    for (const auto& row : codes) ++pf.freq[row[f]];
    p.features.push_back(std::move(pf));
  }
  return p;
}

/// Counts a batch against the profile's fixed schemas. Never re-bins.
inline InferenceBatchStats batch_frequencies(const DataTable& table, const TrainingProfile& profile,
                                             std::string batch_id = {}, TimestampMs timestamp = 0) {
  if (table.empty()) throw InvalidInput("inference batch is empty");
  auto schemas = profile.schemas();
  auto codes = encode(table, schemas);
  InferenceBatchStats b;
  b.model_id = profile.model_id;
  b.batch_id = std::move(batch_id);
  b.timestamp = timestamp;
  b.n_infer = table.num_rows();
  for (std::size_t f = 0; f < schemas.size(); ++f) {
    BatchFeature bf{schemas[f].name(), Counts(schemas[f].category_count(), 0)};
    for (const auto& row : codes) ++bf.freq[row[f]];
    b.features.push_back(std::move(bf));
  }
  return b;
}

// JSON ----------------------------------------------------------------------

inline json to_json(const FeatureSchema& s) {
  json j;
  j["name"] = s.name();
  j["kind"] = to_string(s.kind());
  if (s.is_categorical()) {
    j["categories"] = s.categories();
  } else {
    j["edges"] = s.bins().edges();
  }
  return j;
}

inline FeatureSchema schema_from_json(const json& j) {
  auto name = j.at("name").get<std::string>();
  auto kind = parse_feature_kind(j.at("kind").get<std::string>());
  if (kind == FeatureKind::categorical) {
    if (j.contains("edges")) throw InvalidInput("categorical feature '" + name + "' must not carry edges");
    return FeatureSchema::categorical(name, j.at("categories").get<std::vector<std::string>>());
  }
  if (j.contains("categories")) throw InvalidInput("continuous feature '" + name + "' must not carry categories");
  return FeatureSchema::continuous(name, BinSpec(j.at("edges").get<std::vector<double>>()));
}

inline json to_json(const TrainingProfile& p) {
  json j;
  j["version"] = kFormatVersion;
  j["model_id"] = p.model_id;
  j["n_train"] = p.n_train;
  if (p.created_at != 0) j["created_at"] = p.created_at;
  json feats = json::array();
  for (const auto& f : p.features) {
    json fj = to_json(f.schema);
    fj["freq"] = f.freq;
    fj["importance"] = f.importance;
    feats.push_back(std::move(fj));
  }
  j["features"] = std::move(feats);
  return j;
}

namespace detail {
inline void check_version(const json& j) {
  if (j.contains("version") && j.at("version").get<int>() != kFormatVersion) {
    throw InvalidInput("unsupported format version " + j.at("version").dump());
  }
}

template <typename Fn>
auto parse_guarded(const char* what, Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed ") + what + ": " + e.what());
  }
}
}  // namespace detail

inline TrainingProfile profile_from_json(const json& j) {
  return detail::parse_guarded("profile", [&] {
    detail::check_version(j);
    TrainingProfile p;
    p.model_id = j.at("model_id").get<std::string>();
    p.n_train = j.at("n_train").get<std::uint64_t>();
    p.created_at = j.value("created_at", TimestampMs{0});
    for (const auto& fj : j.at("features")) {
      p.features.push_back(
          ProfileFeature{schema_from_json(fj), fj.at("freq").get<Counts>(), fj.at("importance").get<double>()});
    }
    validate(p);
    return p;
  });
}

inline json to_json(const InferenceBatchStats& b) {
  json j;
  j["version"] = kFormatVersion;
  j["model_id"] = b.model_id;
  j["batch_id"] = b.batch_id;
  j["timestamp"] = b.timestamp;
  j["n_infer"] = b.n_infer;
  json feats = json::array();
  for (const auto& f : b.features) feats.push_back({{"name", f.name}, {"freq", f.freq}});
  j["features"] = std::move(feats);
  return j;
}

inline InferenceBatchStats batch_from_json(const json& j) {
  return detail::parse_guarded("batch", [&] {
    detail::check_version(j);
    InferenceBatchStats b;
    b.model_id = j.value("model_id", std::string{});
    b.batch_id = j.value("batch_id", std::string{});
    b.timestamp = j.value("timestamp", TimestampMs{0});
    b.n_infer = j.at("n_infer").get<std::uint64_t>();
    for (const auto& fj : j.at("features")) {
      b.features.push_back(BatchFeature{fj.at("name").get<std::string>(), fj.at("freq").get<Counts>()});
    }
    if (b.n_infer == 0) throw InvalidInput("batch n_infer must be positive");
    return b;
  });
}

inline std::string serialize(const TrainingProfile& p) { return to_json(p).dump(2) + "\n"; }

inline TrainingProfile parse_profile(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("profile is not valid JSON: ") + e.what());
  }
  return profile_from_json(j);
}

inline TrainingProfile load_profile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("cannot open profile '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_profile(ss.str());
}

inline void save_profile(const std::string& path, const TrainingProfile& p) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write profile '" + path + "'");
  out << serialize(p);
}

}  // namespace mlhealth
