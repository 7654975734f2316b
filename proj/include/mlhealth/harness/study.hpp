#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlhealth/harness/generators.hpp"
#include "mlhealth/harness/naive_bayes.hpp"
#include "mlhealth/harness/stats.hpp"
#include "mlhealth/metrics.hpp"
#include "mlhealth/profile.hpp"

namespace mlhealth::harness {

struct StudyConfig {
  LoadSpec train{LoadKind::periodic, 4000};
  std::size_t n_bins = kDefaultBins;
  std::size_t top_k = kDefaultTopK;
  std::size_t replicates = 5;  // seeds averaged per condition
  double alpha = 1.0;
  std::uint64_t seed = 42;
};

struct StudyRow {
  std::string condition;
  MetricValues metrics;
  double confidence = 0;
  double performance = 0;  // accuracy
  // Selected-feature slots with training mass but no batch mass, summed over
  // replicates. Non-zero exactly when some replicate's KL is infinite.
  std::size_t empty_mass_bins = 0;

  bool operator==(const StudyRow&) const = default;
};

/// Column identifiers in table order: RMSE, KL, Wasserstein, Similarity, Confidence.
enum class Column { rmse, kl, wasserstein, similarity, confidence };
inline constexpr Column kColumns[] = {Column::rmse, Column::kl, Column::wasserstein, Column::similarity,
                                      Column::confidence};

inline const char* to_string(Column c) {
  switch (c) {
    case Column::rmse: return "rmse";
    case Column::kl: return "kl";
    case Column::wasserstein: return "wasserstein";
    case Column::similarity: return "similarity";
    case Column::confidence: return "confidence";
  }
  return "?";
}

inline double column_value(const StudyRow& r, Column c) {
  switch (c) {
    case Column::rmse: return r.metrics.rmse;
    case Column::kl: return r.metrics.kl;
    case Column::wasserstein: return r.metrics.wasserstein;
    case Column::similarity: return r.metrics.similarity;
    case Column::confidence: return r.confidence;
  }
  return 0;
}

struct StudyReport {
  std::string name;
  std::string condition_header;
  std::vector<StudyRow> rows;
  std::vector<std::optional<double>> correlations;  // aligned with kColumns
  std::vector<std::string> notes;

  std::vector<double> column(Column c) const {
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(column_value(r, c));
    return out;
  }

  std::vector<double> performance() const {
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(r.performance);
    return out;
  }

  std::optional<double> correlation(Column c) const {
    return correlations.at(static_cast<std::size_t>(c));
  }

  bool operator==(const StudyReport&) const = default;
};

namespace detail {

struct Trained {
  TrainingProfile profile;
  NBModel model;
};

inline Trained train_reference(const StudyConfig& cfg, const LoadSpec& spec, std::size_t replicate) {
  LoadSpec s = spec;
  s.seed = derive_seed(cfg.seed, std::string("train/") + to_string(spec.kind), replicate);
  auto data = gen_load(s);
  auto schemas = infer_schema(data.table, {}, cfg.n_bins);
  auto model = train_nb(data.table, data.labels, schemas, cfg.alpha);
  auto profile = build_profile(data.table, schemas, "study", model.importances);
  return {std::move(profile), std::move(model)};
}

struct Observation {
  HealthScore score;
  double confidence = 0;
  double accuracy = 0;
  std::size_t empty_mass_bins = 0;
};

inline Observation observe(const Trained& ref, const LabeledTable& batch, std::size_t top_k) {
  auto stats = batch_frequencies(batch.table, ref.profile);
  Observation o;
  o.score = score(ref.profile, stats, std::min(top_k, ref.profile.features.size()));
  for (const auto& name : o.score.selected) {
    for (std::size_t f = 0; f < stats.features.size(); ++f) {
      if (stats.features[f].name != name) continue;
      const auto& ft = ref.profile.features[f].freq;
      const auto& fi = stats.features[f].freq;
      for (std::size_t i = 0; i < ft.size(); ++i) o.empty_mass_bins += ft[i] > 0 && fi[i] == 0;
    }
  }
  auto pred = predict(ref.model, batch.table);
  o.confidence = pred.mean_confidence;
  o.accuracy = accuracy(pred.labels, batch.labels);
  return o;
}

inline StudyRow average(std::string condition, const std::vector<Observation>& obs) {
  StudyRow row;
  row.condition = std::move(condition);
  const double n = static_cast<double>(obs.size());
  for (const auto& o : obs) {
    row.metrics.similarity += o.score.aggregate.similarity / n;
    row.metrics.kl += o.score.aggregate.kl / n;
    row.metrics.rmse += o.score.aggregate.rmse / n;
    row.metrics.wasserstein += o.score.aggregate.wasserstein / n;
    row.confidence += o.confidence / n;
    row.performance += o.accuracy / n;
    row.empty_mass_bins += o.empty_mass_bins;
  }
  return row;
}

inline void finish(StudyReport& report) {
  auto perf = report.performance();
  report.correlations.clear();
  for (auto c : kColumns) report.correlations.push_back(pearson(report.column(c), perf));
}

inline std::string fmt(double v, int precision = 3) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

}  // namespace detail

/// i.i.d. batches of growing size from the training load.
inline StudyReport run_sample_size_study(const StudyConfig& cfg, const std::vector<std::size_t>& sizes) {
  for (auto s : sizes) {
    if (s == 0) throw InvalidInput("batch sizes must be at least 1");
  }
  auto sorted = sizes;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  StudyReport report{"sample-size", "samples", {}, {}, {}};
  std::vector<std::vector<detail::Observation>> obs(sorted.size());
  for (std::size_t r = 0; r < cfg.replicates; ++r) {
    auto ref = detail::train_reference(cfg, cfg.train, r);
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      auto cond = std::to_string(sorted[i]);
      auto batch = draw_iid_batch(cfg.train, sorted[i], derive_seed(cfg.seed, "size/" + cond, r));
      obs[i].push_back(detail::observe(ref, batch, cfg.top_k));
    }
  }
  for (std::size_t i = 0; i < sorted.size(); ++i) report.rows.push_back(detail::average(std::to_string(sorted[i]), obs[i]));
  detail::finish(report);
  return report;
}

inline std::vector<double> default_noise_levels() {
  std::vector<double> levels;
  for (int i = 0; i < 10; ++i) levels.push_back(i / 10.0);
  return levels;
}

/// Fixed-size i.i.d. batches with feature noise at each level.
inline StudyReport run_noise_study(const StudyConfig& cfg, std::vector<double> levels, std::size_t batch_size = 2000) {
  for (double l : levels) {
    if (!(l >= 0 && l < 1)) throw InvalidInput("noise levels must lie in [0, 1)");
  }
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  StudyReport report{"noise", "noise", {}, {}, {}};
  std::vector<std::vector<detail::Observation>> obs(levels.size());
  for (std::size_t r = 0; r < cfg.replicates; ++r) {
    auto ref = detail::train_reference(cfg, cfg.train, r);
    // One clean batch per replicate; levels differ only in the noise added.
    auto clean = draw_iid_batch(cfg.train, batch_size, derive_seed(cfg.seed, "noise/batch", r));
    for (std::size_t i = 0; i < levels.size(); ++i) {
      auto cond = detail::fmt(levels[i], 1);
      LabeledTable noisy{inject_noise(clean.table, levels[i], derive_seed(cfg.seed, "noise/" + cond, r)),
                         clean.labels};
      obs[i].push_back(detail::observe(ref, noisy, cfg.top_k));
    }
  }
  for (std::size_t i = 0; i < levels.size(); ++i) report.rows.push_back(detail::average(detail::fmt(levels[i], 1), obs[i]));
  detail::finish(report);
  return report;
}

/// Train on one load kind, score batches drawn from each load kind.
inline StudyReport run_load_shift_study(const StudyConfig& cfg, std::size_t batch_size = 1000) {
  StudyReport report{"load-shift", "train-test", {}, {}, {}};
  for (auto train_kind : kAllLoads) {
    LoadSpec train_spec = cfg.train;
    train_spec.kind = train_kind;
    std::vector<std::vector<detail::Observation>> obs(std::size(kAllLoads));
    for (std::size_t r = 0; r < cfg.replicates; ++r) {
      auto ref = detail::train_reference(cfg, train_spec, r);
      for (std::size_t t = 0; t < std::size(kAllLoads); ++t) {
        LoadSpec test_spec = train_spec;
        test_spec.kind = kAllLoads[t];
        auto cond = std::string(to_string(train_kind)) + "-" + to_string(kAllLoads[t]);
        auto batch = draw_iid_batch(test_spec, batch_size, derive_seed(cfg.seed, "shift/" + cond, r));
        obs[t].push_back(detail::observe(ref, batch, cfg.top_k));
      }
    }
    for (std::size_t t = 0; t < std::size(kAllLoads); ++t) {
      report.rows.push_back(
          detail::average(std::string(to_string(train_kind)) + "-" + to_string(kAllLoads[t]), obs[t]));
    }
  }
  detail::finish(report);

  // Does similarity track accuracy better than every baseline? Divergences
  // are negated so that "higher is healthier" holds for every column.
  auto sim = report.correlation(Column::similarity);
  std::optional<double> best_baseline;
  std::string best_name = "-";
  for (auto c : {Column::rmse, Column::kl, Column::wasserstein}) {
    auto v = report.correlation(c);
    if (!v) continue;
    if (!best_baseline || -*v > *best_baseline) {
      best_baseline = -*v;
      best_name = to_string(c);
    }
  }
  std::ostringstream note;
  note << "similarity correlation " << (sim ? detail::fmt(*sim) : "-") << "; best baseline (sign-adjusted) "
       << best_name << ' ' << (best_baseline ? detail::fmt(*best_baseline) : "-") << "; similarity highest: "
       << (sim && (!best_baseline || *sim > *best_baseline) ? "yes" : "no");
  report.notes.push_back(note.str());
  return report;
}

// Rendering -----------------------------------------------------------------

inline std::string corr_cell(const std::optional<double>& v, int precision) {
  return v ? detail::fmt(*v, precision) : "-";
}

/// CSV with the correlation row last. Values use shortest round-trip form.
inline std::string to_csv(const StudyReport& r) {
  auto num = [](double v) { return std::isfinite(v) ? csv::format_number(v) : detail::fmt(v); };
  std::ostringstream out;
  out << r.condition_header << ",rmse,kl,wasserstein,similarity,confidence,accuracy\n";
  for (const auto& row : r.rows) {
    out << row.condition;
    for (auto c : kColumns) out << ',' << num(column_value(row, c));
    out << ',' << num(row.performance) << '\n';
  }
  out << "correlation";
  for (std::size_t i = 0; i < std::size(kColumns); ++i) {
    out << ',' << (r.correlations[i] ? csv::format_number(*r.correlations[i]) : "-");
  }
  out << ",-\n";
  return out.str();
}

/// Aligned plain-text table in the column order RMSE, KL, Wasserstein,
/// Similarity, Confidence, Accuracy.
inline std::string to_text(const StudyReport& r) {
  const int w = 12;
  std::ostringstream out;
  char buf[256];
  auto line = [&](const std::string& first, const std::vector<std::string>& cells) {
    std::snprintf(buf, sizeof buf, "%-20s", first.c_str());
    out << buf;
    for (const auto& c : cells) {
      std::snprintf(buf, sizeof buf, "%*s", w, c.c_str());
      out << buf;
    }
    out << '\n';
  };
  line(r.condition_header, {"RMSE", "KL", "Wasserstein", "Similarity", "Confidence", "Accuracy"});
  for (const auto& row : r.rows) {
    std::vector<std::string> cells;
    for (auto c : kColumns) cells.push_back(detail::fmt(column_value(row, c)));
    cells.push_back(detail::fmt(row.performance));
    line(row.condition, cells);
  }
  std::vector<std::string> corr;
  for (const auto& c : r.correlations) corr.push_back(corr_cell(c, 2));
  corr.push_back("-");
  line("correlation", corr);
  for (const auto& n : r.notes) out << "# " << n << '\n';
  return out.str();
}

inline json to_json(const StudyReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"condition", row.condition},
                    {"rmse", number_to_json(row.metrics.rmse)},
                    {"kl", number_to_json(row.metrics.kl)},
                    {"wasserstein", number_to_json(row.metrics.wasserstein)},
                    {"similarity", number_to_json(row.metrics.similarity)},
                    {"confidence", number_to_json(row.confidence)},
                    {"accuracy", number_to_json(row.performance)},
                    {"empty_mass_bins", row.empty_mass_bins}});
  }
  json corr = json::object();
  for (std::size_t i = 0; i < std::size(kColumns); ++i) {
    corr[to_string(kColumns[i])] = r.correlations[i] ? json(*r.correlations[i]) : json("-");
  }
  return {{"study", r.name},
          {"condition", r.condition_header},
          {"rows", std::move(rows)},
          {"correlation", std::move(corr)},
          {"notes", r.notes}};
}

/// Overlaid training and inference histograms, one line per slot, for plotting.
inline std::string histogram_csv(const TrainingProfile& profile, const InferenceBatchStats& batch) {
  validate(batch, profile);
  std::ostringstream out;
  out << "feature,slot,label,train_freq,train_prob,infer_freq,infer_prob\n";
  for (std::size_t f = 0; f < profile.features.size(); ++f) {
    const auto& pf = profile.features[f];
    const auto& s = pf.schema;
    for (std::size_t i = 0; i < pf.freq.size(); ++i) {
      std::string label;
      if (s.is_categorical()) {
        label = i < s.categories().size() ? s.categories()[i] : "<unseen>";
      } else if (i == 0) {
        label = "<" + csv::format_number(s.bins().edges().front());
      } else if (i == s.bins().overflow_index()) {
        label = ">" + csv::format_number(s.bins().edges().back()) + "|missing";
      } else {
        label = "[" + csv::format_number(s.bins().edges()[i - 1]) + ";" + csv::format_number(s.bins().edges()[i]) +
                (i == s.bins().interior_bins() ? "]" : ")");
      }
      out << csv::escape(s.name()) << ',' << i << ',' << csv::escape(label) << ',' << pf.freq[i] << ','
          << csv::format_number(static_cast<double>(pf.freq[i]) / static_cast<double>(profile.n_train)) << ','
          << batch.features[f].freq[i] << ','
          << csv::format_number(static_cast<double>(batch.features[f].freq[i]) / static_cast<double>(batch.n_infer))
          << '\n';
    }
  }
  return out.str();
}

}  // namespace mlhealth::harness
