#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <vector>

#include "mlhealth/error.hpp"
#include "mlhealth/schema.hpp"
#include "mlhealth/table.hpp"

namespace mlhealth::harness {

/// Multinoulli naive Bayes over discretized features.
struct NBModel {
  std::vector<FeatureSchema> schemas;
  std::vector<int> classes;                                   // sorted labels
  std::vector<double> priors;                                 // per class
  std::vector<std::vector<std::vector<double>>> likelihood;   // [class][feature][slot], smoothed
  std::vector<double> importances;                            // normalized mutual information
};

/// Mutual information I(X; Y) in nats from a joint count table [x][y].
inline double mutual_information(const std::vector<std::vector<double>>& joint) {
  double n = 0;
  std::vector<double> px(joint.size(), 0.0), py(joint.empty() ? 0 : joint[0].size(), 0.0);
  for (std::size_t x = 0; x < joint.size(); ++x) {
    for (std::size_t y = 0; y < joint[x].size(); ++y) {
      n += joint[x][y];
      px[x] += joint[x][y];
      py[y] += joint[x][y];
    }
  }
  if (n == 0) return 0.0;
  double mi = 0;
  for (std::size_t x = 0; x < joint.size(); ++x) {
    for (std::size_t y = 0; y < joint[x].size(); ++y) {
      if (joint[x][y] == 0) continue;
      mi += joint[x][y] / n * std::log(joint[x][y] * n / (px[x] * py[y]));
    }
  }
  return std::max(0.0, mi);
}

inline NBModel train_nb(const DataTable& table, std::span<const int> labels, std::span<const FeatureSchema> schemas,
                        double alpha = 1.0) {
  if (table.num_rows() != labels.size()) throw InvalidInput("labels do not match table rows");
  if (!(alpha > 0)) throw InvalidInput("smoothing alpha must be positive");
  NBModel m;
  m.schemas.assign(schemas.begin(), schemas.end());
  std::map<int, std::size_t> class_index;
  for (int y : labels) class_index.emplace(y, 0);
  if (class_index.size() < 2) throw InvalidInput("naive Bayes needs at least two classes");
  for (auto& [y, i] : class_index) {
    i = m.classes.size();
    m.classes.push_back(y);
  }
  const std::size_t n_classes = m.classes.size();
  auto codes = encode(table, schemas);

  std::vector<double> class_counts(n_classes, 0.0);
  // joint[f][slot][class]
  std::vector<std::vector<std::vector<double>>> joint(schemas.size());
  for (std::size_t f = 0; f < schemas.size(); ++f) {
    joint[f].assign(schemas[f].category_count(), std::vector<double>(n_classes, 0.0));
  }
  for (std::size_t r = 0; r < codes.size(); ++r) {
    std::size_t c = class_index.at(labels[r]);
    class_counts[c] += 1;
    for (std::size_t f = 0; f < schemas.size(); ++f) joint[f][codes[r][f]][c] += 1;
  }

  const double n = static_cast<double>(labels.size());
  for (double cc : class_counts) m.priors.push_back(cc / n);
  m.likelihood.assign(n_classes, {});
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (std::size_t f = 0; f < schemas.size(); ++f) {
      const std::size_t slots = schemas[f].category_count();
      std::vector<double> probs(slots);
      for (std::size_t s = 0; s < slots; ++s) {
        probs[s] = (joint[f][s][c] + alpha) / (class_counts[c] + alpha * static_cast<double>(slots));
      }
      m.likelihood[c].push_back(std::move(probs));
    }
  }

  double mi_total = 0;
  for (const auto& j : joint) {
    m.importances.push_back(mutual_information(j));
    mi_total += m.importances.back();
  }
  for (auto& v : m.importances) {
    v = mi_total > 0 ? v / mi_total : 1.0 / static_cast<double>(schemas.size());
  }
  return m;
}

inline NBModel train_nb(const DataTable& table, std::span<const int> labels, std::size_t n_bins = kDefaultBins,
                        double alpha = 1.0) {
  auto schemas = infer_schema(table, {}, n_bins);
  return train_nb(table, labels, schemas, alpha);
}

struct Prediction {
  std::vector<int> labels;
  double mean_confidence = 0;  // mean winning posterior
};

inline Prediction predict(const NBModel& model, const DataTable& table) {
  for (const auto& s : model.schemas) {
    if (table.find_column(s.name()) == DataTable::npos) {
      throw InvalidInput("table lacks model feature '" + s.name() + "'");
    }
  }
  auto codes = encode(table, model.schemas);
  Prediction out;
  out.labels.reserve(codes.size());
  const std::size_t n_classes = model.classes.size();
  std::vector<double> logp(n_classes);
  double conf_sum = 0;
  for (const auto& row : codes) {
    for (std::size_t c = 0; c < n_classes; ++c) {
      double lp = std::log(model.priors[c]);
      for (std::size_t f = 0; f < row.size(); ++f) lp += std::log(model.likelihood[c][f][row[f]]);
      logp[c] = lp;
    }
    std::size_t best = static_cast<std::size_t>(std::max_element(logp.begin(), logp.end()) - logp.begin());
    double denom = 0;
    for (double lp : logp) denom += std::exp(lp - logp[best]);
    conf_sum += 1.0 / denom;
    out.labels.push_back(model.classes[best]);
  }
  out.mean_confidence = codes.empty() ? 0.0 : conf_sum / static_cast<double>(codes.size());
  return out;
}

}  // namespace mlhealth::harness
