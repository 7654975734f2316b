#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <pthread.h>

#include <CLI11.hpp>

#include "mlhealth/gateway.hpp"
#include "mlhealth/harness/generators.hpp"
#include "mlhealth/harness/naive_bayes.hpp"
#include "mlhealth/harness/study.hpp"
#include "mlhealth/metrics.hpp"
#include "mlhealth/monitor.hpp"
#include "mlhealth/profile.hpp"
#include "mlhealth/server.hpp"
#include "mlhealth/table.hpp"

namespace fs = std::filesystem;
using namespace mlhealth;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitAlert = 3;

constexpr const char* kStoreEnv = "MLHEALTH_STORE";
constexpr const char* kDefaultStore = "mlhealth-store.jsonl";

std::atomic<bool> g_stop{false};

void on_stop_signal(int) { g_stop = true; }

void warn(const std::string& msg) { std::cerr << "warning: " << msg << "\n"; }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write '" + path + "'");
  out << text;
  if (!out) throw InvalidInput("write to '" + path + "' failed");
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fixed(double v, int precision = 4) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(precision) << v;
  return ss.str();
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s + " " : s + std::string(width - s.size(), ' ');
}

// Policy flags shared by score and monitor ----------------------------------

struct PolicyFlags {
  std::string metric = "similarity";
  std::optional<double> threshold;
  bool auto_threshold = false;
  double epsilon = kDefaultEpsilon;
  std::size_t warmup = kDefaultWarmup;
  std::string scope = "aggregate";
  std::vector<std::string> group;

  void add_to(CLI::App* cmd, bool allow_auto) {
    cmd->add_option("--metric", metric, "similarity, kl, rmse or wasserstein")->capture_default_str();
    cmd->add_option("--threshold", threshold, "fixed alert threshold (similarity defaults to 0.8)");
    cmd->add_option("--scope", scope, "aggregate, per_feature or feature_group")->capture_default_str();
    cmd->add_option("--group", group, "features watched by the feature_group scope")->delimiter(',');
    if (allow_auto) {
      cmd->add_flag("--auto", auto_threshold, "derive the threshold from the warmup runs");
      cmd->add_option("--epsilon", epsilon, "auto-threshold margin")->capture_default_str();
      cmd->add_option("--warmup", warmup, "runs observed before the threshold is fixed")->capture_default_str();
    }
  }

  AlertPolicy build() const {
    AlertPolicy p;
    p.metric = parse_metric(metric);
    p.direction = direction_for(p.metric);
    p.scope = parse_scope(scope);
    p.group = group;
    p.epsilon = epsilon;
    p.warmup_runs = warmup;
    if (auto_threshold) {
      if (threshold) throw InvalidInput("--threshold and --auto cannot be combined");
      p.auto_threshold = true;
    } else if (threshold) {
      p.threshold = *threshold;
    } else if (p.metric == Metric::similarity) {
      p.threshold = kDefaultSimilarityThreshold;
    } else {
      throw InvalidInput(std::string("--threshold or --auto is required for metric ") + to_string(p.metric));
    }
    validate(p);
    return p;
  }
};

std::size_t resolve_top_k(std::optional<std::size_t> flag, const TrainingProfile& profile) {
  if (!flag) return default_top_k(profile.features.size());
  if (*flag == 0 || *flag > profile.features.size()) {
    throw InvalidInput("--top-k must be between 1 and " + std::to_string(profile.features.size()));
  }
  return *flag;
}

/// A batch file: CSV rows are counted against the profile, JSON is taken as is.
InferenceBatchStats load_batch(const std::string& path, const TrainingProfile& profile, TimestampMs ts = 0) {
  fs::path p(path);
  if (p.extension() == ".json") {
    auto b = detail::parse_guarded("batch", [&] { return batch_from_json(json::parse(read_text(path))); });
    if (b.model_id.empty()) b.model_id = profile.model_id;
    if (ts != 0 && b.timestamp == 0) b.timestamp = ts;
    validate(b, profile);
    return b;
  }
  return batch_frequencies(csv::read_file(path), profile, p.stem().string(), ts);
}

// Output ----------------------------------------------------------------------

std::string describe_alert(const AlertRecord& a) {
  std::ostringstream ss;
  ss << to_string(a.severity) << ": " << a.title << " (" << a.description << ")";
  return ss.str();
}

std::string report_table(const HealthReport& r) {
  std::ostringstream out;
  out << "model " << r.model_id << "  batch " << r.batch_id << "\n";
  std::size_t w = 10;
  for (const auto& f : r.score.features) w = std::max(w, f.name.size() + 2);
  out << pad("feature", w) << pad("similarity", 12) << pad("kl", 10) << pad("rmse", 10) << pad("wasserstein", 12)
      << "top-k\n";
  std::set<std::string> selected(r.score.selected.begin(), r.score.selected.end());
  for (const auto& f : r.score.features) {
    out << pad(f.name, w) << pad(fixed(f.similarity), 12) << pad(fixed(f.kl), 10) << pad(fixed(f.rmse), 10)
        << pad(fixed(f.wasserstein), 12) << (selected.count(f.name) ? "*" : "") << "\n";
  }
  const auto& a = r.score.aggregate;
  out << pad("aggregate", w) << pad(fixed(a.similarity), 12) << pad(fixed(a.kl), 10) << pad(fixed(a.rmse), 10)
      << pad(fixed(a.wasserstein), 12) << "\n";
  out << "alert: " << (r.alert ? describe_alert(*r.alert) : "none") << "\n";
  return out.str();
}

std::string report_csv(const HealthReport& r) {
  std::ostringstream out;
  out << "feature,similarity_raw,similarity,kl,rmse,wasserstein,selected\n";
  std::set<std::string> selected(r.score.selected.begin(), r.score.selected.end());
  auto num = [](double v) { return std::isinf(v) ? std::string(v > 0 ? "inf" : "-inf") : csv::format_number(v); };
  for (const auto& f : r.score.features) {
    out << csv::escape(f.name) << ',' << num(f.similarity_raw) << ',' << num(f.similarity) << ',' << num(f.kl) << ','
        << num(f.rmse) << ',' << num(f.wasserstein) << ',' << (selected.count(f.name) ? 1 : 0) << "\n";
  }
  const auto& a = r.score.aggregate;
  out << "aggregate,," << num(a.similarity) << ',' << num(a.kl) << ',' << num(a.rmse) << ',' << num(a.wasserstein)
      << ",\n";
  return out.str();
}

std::string render_report(const HealthReport& r, const std::string& format) {
  if (format == "json") return to_json(r).dump(2) + "\n";
  if (format == "csv") return report_csv(r);
  return report_table(r);
}

// profile -------------------------------------------------------------------

struct ProfileArgs {
  std::string input;
  std::string output;
  std::string model_id = "model";
  std::size_t bins = kDefaultBins;
  std::string label;
  std::vector<std::string> categorical;
  TimestampMs created_at = 0;
};

/// Mutual information of each feature with the label column, normalized.
std::vector<double> label_importances(const DataTable& features, const std::vector<FeatureSchema>& schemas,
                                      const std::vector<Cell>& labels) {
  std::map<std::string, std::size_t> classes;
  std::vector<std::size_t> y;
  for (const auto& c : labels) {
    std::string key = is_missing(c) ? "" : (is_number(c) ? csv::format_number(std::get<double>(c)) : std::get<std::string>(c));
    y.push_back(classes.emplace(key, classes.size()).first->second);
  }
  auto codes = encode(features, schemas);
  std::vector<double> mi;
  double total_mi = 0;
  for (std::size_t f = 0; f < schemas.size(); ++f) {
    std::vector<std::vector<double>> joint(schemas[f].category_count(), std::vector<double>(classes.size(), 0.0));
    for (std::size_t r = 0; r < codes.size(); ++r) joint[codes[r][f]][y[r]] += 1;
    mi.push_back(harness::mutual_information(joint));
    total_mi += mi.back();
  }
  if (total_mi <= 0) return {};
  return mi;
}

int cmd_profile(const ProfileArgs& a) {
  DataTable table = csv::read_file(a.input);
  if (table.empty()) throw InvalidInput("'" + a.input + "' has no data rows");
  std::vector<Cell> labels;
  if (!a.label.empty()) {
    auto li = table.column_index(a.label);
    std::vector<std::string> cols;
    for (std::size_t c = 0; c < table.num_columns(); ++c) {
      if (c != li) cols.push_back(table.columns()[c]);
    }
    if (cols.empty()) throw InvalidInput("no feature columns besides the label");
    DataTable features(cols);
    for (const auto& row : table.rows()) {
      labels.push_back(row[li]);
      std::vector<Cell> out;
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (c != li) out.push_back(row[c]);
      }
      features.add_row(std::move(out));
    }
    table = std::move(features);
  }
  KindOverrides overrides;
  for (const auto& c : a.categorical) {
    table.column_index(c);
    overrides[c] = FeatureKind::categorical;
  }
  auto schemas = infer_schema(table, overrides, a.bins);
  std::vector<double> importances;
  if (!labels.empty()) importances = label_importances(table, schemas, labels);
  auto profile = build_profile(table, schemas, a.model_id, importances, a.created_at);

  if (a.output.empty()) {
    std::cout << serialize(profile);
    return kExitOk;
  }
  save_profile(a.output, profile);
  std::cout << "model " << profile.model_id << ": " << profile.n_train << " rows, " << profile.features.size()
            << " features -> " << a.output << "\n";
  std::size_t w = 10;
  for (const auto& f : profile.features) w = std::max(w, f.schema.name().size() + 2);
  std::cout << pad("feature", w) << pad("kind", 13) << pad("slots", 7) << "importance\n";
  for (const auto& f : profile.features) {
    std::cout << pad(f.schema.name(), w) << pad(to_string(f.schema.kind()), 13)
              << pad(std::to_string(f.schema.category_count()), 7) << fixed(f.importance) << "\n";
  }
  return kExitOk;
}

// score ---------------------------------------------------------------------

struct ScoreArgs {
  std::string profile;
  std::string batch;
  std::optional<std::size_t> top_k;
  std::string format = "json";
  std::string histograms;
  PolicyFlags policy;
};

int cmd_score(const ScoreArgs& a) {
  auto profile = load_profile(a.profile);
  auto policy = a.policy.build();
  auto batch = load_batch(a.batch, profile);
  auto report = evaluate_batch(profile, batch, policy, resolve_top_k(a.top_k, profile));
  if (!a.histograms.empty()) write_text(a.histograms, harness::histogram_csv(profile, batch));
  std::cout << render_report(report, a.format);
  return report.alert ? kExitAlert : kExitOk;
}

// monitor -------------------------------------------------------------------

struct MonitorArgs {
  std::string profile;
  std::string dir;
  std::optional<std::size_t> top_k;
  std::string format = "table";
  std::string gateway_url;
  bool once = false;
  int interval_ms = 1000;
  int retries = 4;
  PolicyFlags policy;
};

/// Posts alerts to a gateway, retrying with exponential backoff.
class AlertSender {
 public:
  AlertSender(std::string url, int retries) : url_(std::move(url)), retries_(retries) {}

  void enqueue(const AlertRecord& a) {
    json body{{"title", a.title},          {"description", a.description}, {"severity", to_string(a.severity)},
              {"model_id", a.model_id},    {"batch_id", a.batch_id},        {"timestamp", a.timestamp},
              {"payload", to_json(a)}};
    pending_.push_back(std::move(body));
  }

  /// Delivers what it can; undelivered alerts stay queued.
  void flush() {
    while (!pending_.empty() && !g_stop) {
      if (!send(pending_.front())) return;
      pending_.pop_front();
    }
  }

  std::size_t pending() const { return pending_.size(); }

 private:
  bool send(const json& body) {
    auto delay = std::chrono::milliseconds(100);
    for (int attempt = 0; attempt <= retries_; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(delay);
        delay *= 2;
      }
      httplib::Client client(url_);
      client.set_connection_timeout(2);
      client.set_read_timeout(5);
      auto res = client.Post("/api/alerts", body.dump(), "application/json");
      if (res && res->status == 200) return true;
      if (res && res->status >= 400 && res->status < 500) {
        warn("gateway rejected alert: " + res->body);
        return true;  // retrying cannot help
      }
      warn("gateway unreachable at " + url_ + " (attempt " + std::to_string(attempt + 1) + ")");
    }
    return false;
  }

  std::string url_;
  int retries_;
  std::deque<json> pending_;
};

std::vector<fs::path> batch_files(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    auto ext = e.path().extension();
    if (ext == ".csv" || ext == ".json") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.filename() < b.filename(); });
  return out;
}

int cmd_monitor(const MonitorArgs& a) {
  if (!fs::is_directory(a.dir)) throw InvalidInput("'" + a.dir + "' is not a directory");
  auto profile = load_profile(a.profile);
  const std::size_t k = resolve_top_k(a.top_k, profile);
  Monitor monitor(a.policy.build());
  std::optional<AlertSender> sender;
  if (!a.gateway_url.empty()) sender.emplace(a.gateway_url, a.retries);

  std::set<std::string> seen;
  std::size_t alerts = 0;
  TimestampMs last_ts = 0;
  while (!g_stop) {
    for (const auto& file : batch_files(a.dir)) {
      if (g_stop) break;
      if (!seen.insert(file.filename().string()).second) continue;
      last_ts = std::max(last_ts, gateway::wall_clock_ms());
      HealthReport report;
      try {
        auto batch = load_batch(file.string(), profile, last_ts);
        report.model_id = profile.model_id;
        report.batch_id = batch.batch_id;
        report.score = score(profile, batch, k);
        report.alert = monitor.observe(profile.model_id, batch.batch_id, std::max(last_ts, batch.timestamp), report.score);
        last_ts = std::max(last_ts, batch.timestamp);
      } catch (const Error& e) {
        warn("skipping " + file.filename().string() + ": " + e.what());
        continue;
      }
      if (a.format == "json") {
        std::cout << to_json(report).dump() << "\n";
      } else {
        std::cout << report.batch_id << " similarity=" << fixed(report.score.aggregate.similarity)
                  << " alert=" << (report.alert ? describe_alert(*report.alert) : "none") << "\n";
      }
      std::cout.flush();
      if (report.alert) {
        ++alerts;
        if (sender) sender->enqueue(*report.alert);
      }
    }
    if (sender) sender->flush();
    if (a.once) break;
    for (int waited = 0; waited < a.interval_ms && !g_stop; waited += 50) {
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
  }
  if (sender && sender->pending() > 0) warn(std::to_string(sender->pending()) + " alert(s) not delivered");
  return alerts > 0 ? kExitAlert : kExitOk;
}

// study ---------------------------------------------------------------------

struct StudyArgs {
  std::string kind;
  std::string out_dir;
  std::string format = "table";
  std::uint64_t seed = 42;
  std::size_t bins = kDefaultBins;
  std::size_t top_k = kDefaultTopK;
  std::size_t replicates = 5;
  std::vector<std::size_t> sizes{10, 20, 50, 100, 200, 500, 1000, 2000};
  std::vector<double> levels = harness::default_noise_levels();
};

int cmd_study(const StudyArgs& a) {
  harness::StudyConfig cfg;
  cfg.seed = a.seed;
  cfg.n_bins = a.bins;
  cfg.top_k = a.top_k;
  cfg.replicates = a.replicates;
  if (cfg.replicates == 0) throw InvalidInput("--replicates must be positive");
  if (cfg.top_k == 0) throw InvalidInput("--top-k must be positive");
  harness::StudyReport report;
  if (a.kind == "sample-size") {
    report = harness::run_sample_size_study(cfg, a.sizes);
  } else if (a.kind == "noise") {
    report = harness::run_noise_study(cfg, a.levels);
  } else if (a.kind == "load-shift") {
    report = harness::run_load_shift_study(cfg);
  } else {
    throw InvalidInput("unknown study '" + a.kind + "' (sample-size, noise or load-shift)");
  }
  if (!a.out_dir.empty()) {
    fs::create_directories(a.out_dir);
    fs::path base = fs::path(a.out_dir) / a.kind;
    write_text(base.string() + ".csv", harness::to_csv(report));
    write_text(base.string() + ".txt", harness::to_text(report));
    write_text(base.string() + ".json", harness::to_json(report).dump(2) + "\n");
  }
  if (a.format == "json") {
    std::cout << harness::to_json(report).dump(2) << "\n";
  } else if (a.format == "csv") {
    std::cout << harness::to_csv(report);
  } else {
    std::cout << harness::to_text(report);
  }
  return kExitOk;
}

// generate ------------------------------------------------------------------

struct GenerateArgs {
  std::string kind;
  std::string output;
  std::size_t samples = 1000;
  std::size_t features = 4;
  std::uint64_t seed = 1;
  double noise = 0.0;
  bool labels = true;
};

int cmd_generate(const GenerateArgs& a) {
  harness::LoadSpec spec;
  spec.kind = harness::parse_load_kind(a.kind);
  spec.n_samples = a.samples;
  spec.n_features = a.features;
  spec.seed = a.seed;
  auto data = harness::gen_load(spec);
  DataTable table = harness::inject_noise(data.table, a.noise, harness::mix64(a.seed ^ 0x6e6f697365ULL));
  if (a.labels) {
    auto cols = table.columns();
    cols.push_back("label");
    DataTable labeled(cols);
    for (std::size_t r = 0; r < table.num_rows(); ++r) {
      auto row = table.rows()[r];
      row.emplace_back(static_cast<double>(data.labels[r]));
      labeled.add_row(std::move(row));
    }
    table = std::move(labeled);
  }
  if (a.output.empty()) {
    csv::write(std::cout, table);
  } else {
    csv::write_file(a.output, table);
  }
  return kExitOk;
}

// serve ---------------------------------------------------------------------

struct ServeArgs {
  std::string store;
  std::string listen = "127.0.0.1:8080";
};

std::pair<std::string, int> split_listen(const std::string& addr) {
  auto colon = addr.rfind(':');
  if (colon == std::string::npos) throw InvalidInput("--listen expects host:port");
  auto host = addr.substr(0, colon);
  auto port = gateway::parse_int_param("port", addr.substr(colon + 1));
  if (port < 0 || port > 65535) throw InvalidInput("port out of range");
  return {host.empty() ? "0.0.0.0" : host, static_cast<int>(port)};
}

int cmd_serve(const ServeArgs& a) {
  std::string store = a.store;
  if (store.empty()) {
    const char* env = std::getenv(kStoreEnv);
    store = env && *env ? env : kDefaultStore;
  }
  auto [host, port] = split_listen(a.listen);

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  gateway::Gateway gw(store);
  gateway::Server server(gw);
  if (!server.bind(host, port)) {
    std::cerr << "error: cannot listen on " << host << ":" << port << "\n";
    return kExitUsage;
  }
  std::cout << "listening on " << host << ":" << server.port() << " store " << store << std::endl;
  std::thread worker([&server] { server.run(); });
  int sig = 0;
  sigwait(&signals, &sig);
  server.stop();
  worker.join();
  gw.flush();
  std::cerr << "stopped after signal " << sig << "\n";
  return kExitOk;
}

int run(int argc, char** argv) {
  CLI::App app{"Distribution-drift health monitoring for ML pipelines"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "mlhealth 0.1.0");
  const std::vector<std::string> formats{"json", "table", "csv"};

  ProfileArgs pa;
  auto* profile = app.add_subcommand("profile", "build a training profile from a CSV file");
  profile->add_option("train", pa.input, "training CSV")->required()->check(CLI::ExistingFile);
  profile->add_option("-o,--out", pa.output, "profile JSON path (stdout when omitted)");
  profile->add_option("--model-id", pa.model_id)->capture_default_str();
  profile->add_option("--bins", pa.bins, "equal-width bins per continuous feature")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  profile->add_option("--label", pa.label, "label column: excluded, used for importances");
  profile->add_option("--categorical", pa.categorical, "columns forced categorical")->delimiter(',');
  profile->add_option("--created-at", pa.created_at, "creation time in ms since epoch");

  ScoreArgs sa;
  auto* score_cmd = app.add_subcommand("score", "score one inference batch against a profile");
  score_cmd->add_option("profile", sa.profile, "profile JSON")->required()->check(CLI::ExistingFile);
  score_cmd->add_option("batch", sa.batch, "batch CSV or batch JSON")->required()->check(CLI::ExistingFile);
  score_cmd->add_option("--top-k", sa.top_k, "features aggregated by importance");
  score_cmd->add_option("--format", sa.format)->capture_default_str()->check(CLI::IsMember(formats));
  score_cmd->add_option("--histograms", sa.histograms, "write overlaid histogram CSV here");
  sa.policy.add_to(score_cmd, false);

  MonitorArgs ma;
  auto* monitor = app.add_subcommand("monitor", "score batch files as they appear in a directory");
  monitor->add_option("profile", ma.profile, "profile JSON")->required()->check(CLI::ExistingFile);
  monitor->add_option("dir", ma.dir, "directory watched for batch files")->required()->check(CLI::ExistingDirectory);
  monitor->add_option("--top-k", ma.top_k, "features aggregated by importance");
  monitor->add_option("--format", ma.format)->capture_default_str()->check(CLI::IsMember(formats));
  monitor->add_option("--gateway-url", ma.gateway_url, "post alerts to this gateway");
  monitor->add_flag("--once", ma.once, "process the current files and exit");
  monitor->add_option("--interval-ms", ma.interval_ms, "polling interval")->capture_default_str();
  monitor->add_option("--retries", ma.retries, "gateway retries per alert")->capture_default_str();
  ma.policy.add_to(monitor, true);

  StudyArgs st;
  auto* study = app.add_subcommand("study", "run a synthetic study");
  study->add_option("kind", st.kind, "sample-size, noise or load-shift")->required();
  study->add_option("--out-dir", st.out_dir, "write <kind>.csv, .txt and .json here");
  study->add_option("--format", st.format)->capture_default_str()->check(CLI::IsMember(formats));
  study->add_option("--seed", st.seed)->capture_default_str();
  study->add_option("--bins", st.bins)->capture_default_str()->check(CLI::PositiveNumber);
  study->add_option("--top-k", st.top_k)->capture_default_str();
  study->add_option("--replicates", st.replicates)->capture_default_str();
  study->add_option("--sizes", st.sizes, "sample-size study batch sizes")->delimiter(',');
  study->add_option("--levels", st.levels, "noise study levels")->delimiter(',');

  GenerateArgs ga;
  auto* generate = app.add_subcommand("generate", "write a synthetic load as CSV");
  generate->add_option("kind", ga.kind, "periodic, flash or linear")->required();
  generate->add_option("-o,--out", ga.output, "CSV path (stdout when omitted)");
  generate->add_option("--samples", ga.samples)->capture_default_str()->check(CLI::PositiveNumber);
  generate->add_option("--features", ga.features)->capture_default_str()->check(CLI::PositiveNumber);
  generate->add_option("--seed", ga.seed)->capture_default_str();
  generate->add_option("--noise", ga.noise, "noise level in [0, 1)")->capture_default_str();
  generate->add_flag("!--no-labels", ga.labels, "omit the label column");

  ServeArgs sv;
  auto* serve = app.add_subcommand("serve", "run the stats gateway");
  serve->add_option("--store", sv.store, std::string("store path (default $") + kStoreEnv + " or " + kDefaultStore + ")");
  serve->add_option("--listen", sv.listen, "host:port, port 0 picks a free one")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (*profile) return cmd_profile(pa);
  if (*score_cmd) return cmd_score(sa);
  if (*monitor) return cmd_monitor(ma);
  if (*study) return cmd_study(st);
  if (*generate) return cmd_generate(ga);
  if (*serve) return cmd_serve(sv);
  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGINT, on_stop_signal);
  std::signal(SIGTERM, on_stop_signal);
  try {
    return run(argc, argv);
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NotFound& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const StoreError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}
