#pragma once

// Configuration-driven experiments: regret sweeps, PAC success rates, the
// distinguisher confusion matrix, regret-constant calibration, the graph
// adapter transcript check and theory tables. Results are emitted as CSV and
// JSON with a fixed column order, byte-identical for identical config + seed.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "mmab/bai.hpp"
#include "mmab/core.hpp"
#include "mmab/environments.hpp"
#include "mmab/graphs.hpp"
#include "mmab/theory.hpp"
#include "mmab/twostage.hpp"

namespace mmab {

using json = nlohmann::json;

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// -- configuration ------------------------------------------------------------

enum class ExperimentKind { kRegretSweep, kPacSuccess, kDistinguisher, kGraphAdapter, kTheoryTables, kCalibrate };

inline const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::kRegretSweep: return "regret-sweep";
    case ExperimentKind::kPacSuccess: return "pac-success";
    case ExperimentKind::kDistinguisher: return "distinguisher";
    case ExperimentKind::kGraphAdapter: return "graph-adapter";
    case ExperimentKind::kTheoryTables: return "theory-tables";
    case ExperimentKind::kCalibrate: return "calibrate";
  }
  return "?";
}

inline ExperimentKind parse_experiment_kind(const std::string& s) {
  for (auto k : {ExperimentKind::kRegretSweep, ExperimentKind::kPacSuccess, ExperimentKind::kDistinguisher,
                 ExperimentKind::kGraphAdapter, ExperimentKind::kTheoryTables, ExperimentKind::kCalibrate}) {
    if (s == to_string(k)) return k;
  }
  throw ConfigError("unknown experiment '" + s + "'");
}

struct InstanceSpec {
  // h0 | hj | bernoulli | gaussian_thresholded | adversarial_csv
  std::string kind = "hj";
  double eps = 0.1;
  std::size_t biased = 1;     // 1-based flat arm for hj and gaussian_thresholded; 0 means none
  std::vector<double> means;  // bernoulli
  std::string path;           // adversarial_csv
  double sigma = 0.0;         // gaussian_thresholded; 0 selects sigma_0(eps)
};

struct PacSettings {
  double eps = 0.15;
  double delta = 0.05;
  double regret_constant = 1.0;
  BudgetMode mode = BudgetMode::kCalibrated;
  double safety = 2.0;
  std::uint64_t budget = 0;  // 0: derive from the fields above
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kRegretSweep;
  std::vector<GroupVector> groups;
  std::string graph;  // graph-adapter only; empty selects a built-in example
  InstanceSpec instance;
  std::vector<std::uint64_t> horizons;
  std::size_t trials = 1;
  std::uint64_t seed = 1;
  std::optional<LearningRates> rates;
  PacSettings pac;
  std::size_t workers = 1;  // not part of the identity of a run
  std::string out = ".";    // ditto
};

namespace detail {

inline void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return it.key() == a; }) == allowed.end()) {
      throw ConfigError(where + ": unknown key '" + it.key() + "'");
    }
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

}  // namespace detail

inline ExperimentConfig config_from_json(const json& j) {
  using detail::get_or;
  detail::reject_unknown(j,
                         {"experiment", "groups", "graph", "instance", "horizons", "trials", "seed",
                          "learning_rates", "pac", "workers", "out"},
                         "config");
  ExperimentConfig c;
  if (j.contains("experiment")) c.kind = parse_experiment_kind(get_or<std::string>(j, "experiment", "", "config"));
  for (const auto& sizes : get_or<std::vector<std::vector<std::size_t>>>(j, "groups", {}, "config")) {
    try {
      c.groups.emplace_back(sizes);
    } catch (const ParameterError& e) {
      throw ConfigError(std::string("config.groups: ") + e.what());
    }
  }
  c.graph = get_or<std::string>(j, "graph", "", "config");
  if (j.contains("instance")) {
    const json& i = j.at("instance");
    detail::reject_unknown(i, {"kind", "eps", "biased", "means", "path", "sigma"}, "config.instance");
    c.instance.kind = get_or<std::string>(i, "kind", c.instance.kind, "config.instance");
    c.instance.eps = get_or<double>(i, "eps", c.instance.eps, "config.instance");
    c.instance.biased = get_or<std::size_t>(i, "biased", c.instance.biased, "config.instance");
    c.instance.means = get_or<std::vector<double>>(i, "means", {}, "config.instance");
    c.instance.path = get_or<std::string>(i, "path", "", "config.instance");
    c.instance.sigma = get_or<double>(i, "sigma", 0.0, "config.instance");
  }
  c.horizons = get_or<std::vector<std::uint64_t>>(j, "horizons", {}, "config");
  c.trials = get_or<std::size_t>(j, "trials", c.trials, "config");
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed, "config");
  if (j.contains("learning_rates")) {
    const json& r = j.at("learning_rates");
    detail::reject_unknown(r, {"eta", "eta_k"}, "config.learning_rates");
    LearningRates lr;
    lr.eta = get_or<double>(r, "eta", 0.0, "config.learning_rates");
    lr.etas = get_or<std::vector<double>>(r, "eta_k", {}, "config.learning_rates");
    c.rates = lr;
  }
  if (j.contains("pac")) {
    const json& p = j.at("pac");
    detail::reject_unknown(p, {"eps", "delta", "regret_constant", "mode", "safety", "budget"}, "config.pac");
    c.pac.eps = get_or<double>(p, "eps", c.pac.eps, "config.pac");
    c.pac.delta = get_or<double>(p, "delta", c.pac.delta, "config.pac");
    c.pac.regret_constant = get_or<double>(p, "regret_constant", c.pac.regret_constant, "config.pac");
    const auto mode = get_or<std::string>(p, "mode", "calibrated", "config.pac");
    if (mode == "calibrated") c.pac.mode = BudgetMode::kCalibrated;
    else if (mode == "theoretical") c.pac.mode = BudgetMode::kTheoretical;
    else throw ConfigError("config.pac.mode: expected 'calibrated' or 'theoretical'");
    c.pac.safety = get_or<double>(p, "safety", c.pac.safety, "config.pac");
    c.pac.budget = get_or<std::uint64_t>(p, "budget", 0, "config.pac");
  }
  c.workers = get_or<std::size_t>(j, "workers", c.workers, "config");
  c.out = get_or<std::string>(j, "out", c.out, "config");
  return c;
}

/// Everything that determines results; `workers` and `out` are left out.
inline json canonical_json(const ExperimentConfig& c) {
  json groups = json::array();
  for (const auto& g : c.groups) groups.push_back(g.sizes());
  json j{{"experiment", to_string(c.kind)},
         {"groups", groups},
         {"graph", c.graph},
         {"instance",
          {{"kind", c.instance.kind},
           {"eps", c.instance.eps},
           {"biased", c.instance.biased},
           {"means", c.instance.means},
           {"path", c.instance.path},
           {"sigma", c.instance.sigma}}},
         {"horizons", c.horizons},
         {"trials", c.trials},
         {"seed", c.seed},
         {"pac",
          {{"eps", c.pac.eps},
           {"delta", c.pac.delta},
           {"regret_constant", c.pac.regret_constant},
           {"mode", c.pac.mode == BudgetMode::kCalibrated ? "calibrated" : "theoretical"},
           {"safety", c.pac.safety},
           {"budget", c.pac.budget}}}};
  if (c.rates) j["learning_rates"] = {{"eta", c.rates->eta}, {"eta_k", c.rates->etas}};
  return j;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

/// FNV-1a over the canonical JSON dump, as 16 hex digits.
inline std::string config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : canonical_json(c).dump()) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// -- loss sources ---------------------------------------------------------------

/// A stochastic instance (optionally Gaussian losses thresholded at zero) or
/// a fixed loss sequence, with the arms' mean losses when they are known.
struct LossSource {
  StochasticInstance instance;
  bool threshold = false;
  std::optional<AdversarialSequence> sequence;
  std::vector<double> means;  // empty for sequences

  std::size_t arms() const { return sequence ? sequence->arms : instance.size(); }
  bool stochastic() const { return !sequence; }

  void draw(std::size_t t, Rng& env, LossVector& out) const {
    if (sequence) {
      if (t >= sequence->rounds()) throw IndexError("loss sequence exhausted at round " + std::to_string(t));
      const auto first = sequence->losses.begin() + static_cast<std::ptrdiff_t>(t * sequence->arms);
      out.values.assign(first, first + static_cast<std::ptrdiff_t>(sequence->arms));
      out.range = LossRange::kUnitInterval;
      return;
    }
    sample_round_into(instance, env, out);
    if (threshold) {
      for (double& v : out.values) v = gaussian_to_bernoulli(v);
      out.range = LossRange::kUnitInterval;
    }
  }
};

inline LossSource make_source(const InstanceSpec& spec, const GroupVector& g) {
  LossSource src;
  const std::string& k = spec.kind;
  if (k == "h0") {
    src.instance = make_block_h0(g);
  } else if (k == "hj") {
    if (spec.biased == 0) src.instance = make_block_h0(g);
    else src.instance = make_block_hj(g, spec.biased - 1, spec.eps);
  } else if (k == "bernoulli") {
    if (spec.means.size() != g.arms()) throw ConfigError("instance.means: one mean per arm required for " + g.to_string());
    src.instance = make_bernoulli(g, spec.means);
  } else if (k == "gaussian_thresholded") {
    const double sigma = spec.sigma > 0.0 ? spec.sigma : solve_sigma0(spec.eps);
    if (spec.biased > g.arms()) throw ConfigError("instance.biased out of range");
    const auto single = make_gaussian_nj(g.arms(), spec.biased, spec.eps, sigma, spec.sigma == 0.0);
    src.instance = single.regrouped(g);
    src.threshold = true;
    for (const auto& a : src.instance.arms) src.means.push_back(normal_cdf(a.mean / a.sigma));
    return src;
  } else if (k == "adversarial_csv") {
    src.sequence = load_loss_csv(spec.path);
    if (src.sequence->arms != g.arms()) {
      throw ConfigError(spec.path + ": " + std::to_string(src.sequence->arms) + " columns but " + g.to_string() +
                        " has " + std::to_string(g.arms()) + " arms");
    }
    return src;
  } else {
    throw ConfigError("instance.kind: unknown kind '" + k + "'");
  }
  src.means = src.instance.means();
  return src;
}

// -- trials ---------------------------------------------------------------------

struct TrialRecord {
  std::size_t trial = 0;
  std::uint64_t horizon = 0;
  double cumulative_loss = 0.0;
  std::vector<double> arm_losses;  // cumulative realized loss of each fixed arm
  std::vector<std::uint64_t> pulls;
  std::vector<double> regret_vs_arm;  // cumulative_loss - arm_losses[a]
  std::size_t best_arm = 0;           // argmin of arm_losses, lowest index on ties
  double regret = 0.0;                // regret_vs_arm[best_arm]
  std::optional<double> pseudo_regret;  // sum over rounds of mean(pulled) - min mean
};

inline TrialRecord run_regret_trial(const LossSource& src, const GroupVector& g, std::uint64_t horizon,
                                    std::uint64_t seed, const std::optional<LearningRates>& rates) {
  if (src.arms() != g.arms()) throw ShapeError("run_regret_trial: source and groups disagree on arm count");
  Streams streams(seed);
  TwoStageState s = init(g, horizon, rates);
  TrialRecord r;
  r.horizon = horizon;
  r.arm_losses.assign(g.arms(), 0.0);
  r.pulls.assign(g.arms(), 0);
  double min_mean = 0.0;
  if (src.stochastic()) min_mean = *std::min_element(src.means.begin(), src.means.end());
  double pseudo = 0.0;
  LossVector lv;
  for (std::uint64_t t = 0; t < horizon; ++t) {
    src.draw(t, streams.environment, lv);
    const RoundRecord rec = play_round(s, lv, streams.learner);
    r.cumulative_loss += rec.incurred;
    for (std::size_t i = 0; i < lv.size(); ++i) r.arm_losses[i] += lv[i];
    ++r.pulls[rec.arm];
    if (src.stochastic()) pseudo += src.means[rec.arm] - min_mean;
  }
  r.regret_vs_arm.resize(g.arms());
  for (std::size_t a = 0; a < g.arms(); ++a) r.regret_vs_arm[a] = r.cumulative_loss - r.arm_losses[a];
  r.best_arm = static_cast<std::size_t>(std::min_element(r.arm_losses.begin(), r.arm_losses.end()) -
                                        r.arm_losses.begin());
  r.regret = r.regret_vs_arm[r.best_arm];
  if (src.stochastic()) r.pseudo_regret = pseudo;
  return r;
}

/// Runs `count` independent jobs on up to `workers` threads; results land at
/// their job index, so the output does not depend on scheduling.
template <class R>
std::vector<R> run_parallel(std::size_t count, std::size_t workers, const std::function<R(std::size_t)>& job) {
  std::vector<R> out(count);
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) out[i] = job(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; !failed && (i = next++) < count;) {
        try {
          out[i] = job(i);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

// -- statistics -----------------------------------------------------------------

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation
  double stderr_ = 0.0;
  std::size_t n = 0;
};

inline Summary summarize(const std::vector<double>& xs) {
  Summary s;
  s.n = xs.size();
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(s.n - 1));
    s.stderr_ = s.stddev / std::sqrt(static_cast<double>(s.n));
  }
  return s;
}

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

/// Wilson score interval at 95%.
inline Interval wilson_interval(std::size_t successes, std::size_t n, double z = 1.959963984540054) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double centre = (p + z2 / (2.0 * nn)) / (1.0 + z2 / nn);
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / (1.0 + z2 / nn);
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Ordinary least squares of log(y) on log(x).
inline LineFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ParameterError("loglog_fit: need at least two points");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw DomainError("loglog_fit: values must be positive");
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  LineFit f;
  f.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  f.intercept = (sy - f.slope * sx) / n;
  return f;
}

// -- reports --------------------------------------------------------------------

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<json>> rows;

  friend bool operator==(const Table&, const Table&) = default;
};

struct RunReport {
  std::string experiment;
  std::string config_hash;
  std::uint64_t seed = 0;
  json config;
  std::vector<Table> tables;  // tables[0] is the summary; "trials" is the long-format data

  const Table* find(const std::string& name) const {
    for (const auto& t : tables)
      if (t.name == name) return &t;
    return nullptr;
  }

  friend bool operator==(const RunReport&, const RunReport&) = default;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string csv_cell(const json& v) {
  switch (v.type()) {
    case json::value_t::null: return "";
    case json::value_t::boolean: return v.get<bool>() ? "true" : "false";
    case json::value_t::number_integer: return std::to_string(v.get<std::int64_t>());
    case json::value_t::number_unsigned: return std::to_string(v.get<std::uint64_t>());
    case json::value_t::number_float: return format_double(v.get<double>());
    case json::value_t::string: {
      const auto s = v.get<std::string>();
      if (s.find_first_of(",\"\n") == std::string::npos) return s;
      std::string q = "\"";
      for (char ch : s) {
        if (ch == '"') q += '"';
        q += ch;
      }
      return q + "\"";
    }
    default: return v.dump();
  }
}

}  // namespace detail

inline std::string to_csv(const Table& t) {
  std::string out;
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    if (c) out += ',';
    out += t.columns[c];
  }
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      out += detail::csv_cell(row[c]);
    }
    out += '\n';
  }
  return out;
}

inline json to_json(const RunReport& r) {
  json tables = json::array();
  for (const auto& t : r.tables) {
    json rows = json::array();
    for (const auto& row : t.rows) rows.push_back(row);
    tables.push_back({{"name", t.name}, {"columns", t.columns}, {"rows", rows}});
  }
  return {{"experiment", r.experiment}, {"config_hash", r.config_hash}, {"seed", r.seed},
          {"config", r.config},         {"tables", tables}};
}

inline RunReport report_from_json(const json& j) {
  RunReport r;
  r.experiment = j.at("experiment").get<std::string>();
  r.config_hash = j.at("config_hash").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.config = j.at("config");
  for (const auto& t : j.at("tables")) {
    Table table;
    table.name = t.at("name").get<std::string>();
    table.columns = t.at("columns").get<std::vector<std::string>>();
    for (const auto& row : t.at("rows")) table.rows.push_back(row.get<std::vector<json>>());
    r.tables.push_back(std::move(table));
  }
  return r;
}

inline std::string report_json_text(const RunReport& r) { return to_json(r).dump(1) + "\n"; }

inline RunReport load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open report " + path);
  return report_from_json(json::parse(in));
}

/// Writes report.csv (summary), report.json (everything), plotdata.csv (the
/// long-format trial table) and one <name>.csv per remaining table.
inline std::vector<std::string> emit(const RunReport& r, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir + ": " + ec.message());
  std::vector<std::string> written;
  auto write = [&](const std::string& name, const std::string& text) {
    const std::string path = (fs::path(dir) / name).string();
    std::ofstream outf(path, std::ios::binary);
    if (!outf) throw std::runtime_error("cannot write " + path);
    outf << text;
    if (!outf) throw std::runtime_error("write failed for " + path);
    written.push_back(path);
  };
  write("report.csv", r.tables.empty() ? std::string() : to_csv(r.tables.front()));
  write("report.json", report_json_text(r));
  if (const Table* trials = r.find("trials")) write("plotdata.csv", to_csv(*trials));
  for (std::size_t i = 1; i < r.tables.size(); ++i) {
    if (r.tables[i].name != "trials") write(r.tables[i].name + ".csv", to_csv(r.tables[i]));
  }
  return written;
}

inline RunReport new_report(const ExperimentConfig& c) {
  RunReport r;
  r.experiment = to_string(c.kind);
  r.config_hash = config_hash(c);
  r.seed = c.seed;
  r.config = canonical_json(c);
  return r;
}

/// Long-format metric rows: hash, cell label, trial, metric, value.
inline Table trials_table() { return {"trials", {"config_hash", "cell", "trial", "metric", "value"}, {}}; }

inline void add_trial_rows(Table& t, const std::string& hash, const std::string& cell, std::size_t trial,
                           std::initializer_list<std::pair<const char*, json>> metrics) {
  for (const auto& [name, value] : metrics) t.rows.push_back({hash, cell, trial, name, value});
}

// -- experiments ------------------------------------------------------------------

inline void require_common(const ExperimentConfig& c) {
  if (c.trials == 0) throw ConfigError("trials must be >= 1");
  if (c.groups.empty() && c.kind != ExperimentKind::kTheoryTables && c.kind != ExperimentKind::kGraphAdapter) {
    throw ConfigError("groups must list at least one group vector");
  }
}

inline std::optional<LearningRates> rates_for(const ExperimentConfig& c, const GroupVector& g) {
  if (!c.rates) return std::nullopt;
  if (c.rates->etas.size() != g.groups()) {
    throw ConfigError("learning_rates.eta_k has " + std::to_string(c.rates->etas.size()) + " entries but " +
                      g.to_string() + " has " + std::to_string(g.groups()) + " groups");
  }
  return c.rates;
}

inline std::string cell_label(const GroupVector& g, std::uint64_t horizon) {
  return g.to_string() + "@" + std::to_string(horizon);
}

struct RegretCell {
  GroupVector groups;
  std::uint64_t horizon = 0;
  std::vector<TrialRecord> trials;
  Summary regret;
  std::optional<Summary> pseudo;

  /// Mean regret against the empirical best arm, over sqrt(T S).
  double normalized() const { return regret.mean / std::sqrt(static_cast<double>(horizon) * groups.log_size_sum()); }
};

struct RegretSweep {
  std::vector<RegretCell> cells;
  std::vector<std::optional<LineFit>> fits;  // one per groups entry
};

/// Seed of trial i within cell `cell`; cells get disjoint trial ranges.
inline std::uint64_t cell_trial_seed(std::uint64_t base, std::size_t cell, std::size_t trials, std::size_t i) {
  return trial_seed(base, static_cast<std::uint64_t>(cell) * trials + i);
}

inline RegretSweep regret_sweep(const ExperimentConfig& c) {
  require_common(c);
  if (c.horizons.empty()) throw ConfigError("horizons must be nonempty");
  RegretSweep sweep;
  std::size_t cell_index = 0;
  for (const auto& g : c.groups) {
    const LossSource src = make_source(c.instance, g);
    const auto rates = rates_for(c, g);
    std::vector<double> xs, ys;
    for (std::uint64_t horizon : c.horizons) {
      if (horizon == 0) throw ConfigError("horizons must be >= 1");
      if (src.sequence && horizon > src.sequence->rounds()) {
        throw ConfigError(c.instance.path + ": horizon " + std::to_string(horizon) + " exceeds the " +
                          std::to_string(src.sequence->rounds()) + " rounds in the sequence");
      }
      RegretCell cell;
      cell.groups = g;
      cell.horizon = horizon;
      const std::size_t ci = cell_index++;
      cell.trials = run_parallel<TrialRecord>(c.trials, c.workers, [&](std::size_t i) {
        TrialRecord r = run_regret_trial(src, g, horizon, cell_trial_seed(c.seed, ci, c.trials, i), rates);
        r.trial = i;
        return r;
      });
      std::vector<double> reg, pse;
      for (const auto& t : cell.trials) {
        reg.push_back(t.regret);
        if (t.pseudo_regret) pse.push_back(*t.pseudo_regret);
      }
      cell.regret = summarize(reg);
      if (src.stochastic()) cell.pseudo = summarize(pse);
      xs.push_back(static_cast<double>(horizon));
      ys.push_back(cell.regret.mean);
      sweep.cells.push_back(std::move(cell));
    }
    std::optional<LineFit> fit;
    if (xs.size() >= 2 && std::all_of(ys.begin(), ys.end(), [](double y) { return y > 0.0; })) fit = loglog_fit(xs, ys);
    sweep.fits.push_back(fit);
  }
  return sweep;
}

namespace detail {

inline json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace detail

inline RunReport report_regret_sweep(const ExperimentConfig& c, const RegretSweep& sweep,
                                     std::optional<double> c_hat = std::nullopt) {
  RunReport r = new_report(c);
  Table summary{"summary",
                {"config_hash", "groups", "T", "trials", "mean_regret", "sd_regret", "se_regret", "mean_pseudo_regret",
                 "sd_pseudo_regret", "se_pseudo_regret", "normalized", "bound_c1"},
                {}};
  Table trials = trials_table();
  for (const auto& cell : sweep.cells) {
    const auto& p = cell.pseudo;
    summary.rows.push_back({r.config_hash, cell.groups.to_string(), cell.horizon, cell.trials.size(), cell.regret.mean,
                            cell.regret.stddev, cell.regret.stderr_, detail::opt(p ? std::optional(p->mean) : std::nullopt),
                            detail::opt(p ? std::optional(p->stddev) : std::nullopt),
                            detail::opt(p ? std::optional(p->stderr_) : std::nullopt), cell.normalized(),
                            regret_upper_bound(cell.groups, static_cast<double>(cell.horizon), 1.0)});
    const std::string label = cell_label(cell.groups, cell.horizon);
    for (const auto& t : cell.trials) {
      add_trial_rows(trials, r.config_hash, label, t.trial,
                     {{"cumulative_loss", t.cumulative_loss},
                      {"regret", t.regret},
                      {"best_arm", t.best_arm + 1},
                      {"pseudo_regret", detail::opt(t.pseudo_regret)}});
    }
  }
  Table fits{"fits", {"config_hash", "groups", "slope", "intercept"}, {}};
  for (std::size_t k = 0; k < c.groups.size(); ++k) {
    const auto& f = sweep.fits[k];
    fits.rows.push_back({r.config_hash, c.groups[k].to_string(), f ? json(f->slope) : json(nullptr),
                         f ? json(f->intercept) : json(nullptr)});
  }
  r.tables = {std::move(summary), std::move(trials), std::move(fits)};
  if (c_hat) {
    r.tables.push_back({"calibration",
                        {"config_hash", "c_hat", "pac_eps", "delta", "safety", "budget_first_groups"},
                        {{r.config_hash, *c_hat, c.pac.eps, c.pac.delta, c.pac.safety,
                          calibrated_budget(c.groups.front(), c.pac.eps, *c_hat, c.pac.delta, c.pac.safety)}}});
  }
  return r;
}

/// The empirical regret constant: max over cells of mean regret / sqrt(T S).
inline double calibrate_constant(const RegretSweep& sweep) {
  double c = 0.0;
  for (const auto& cell : sweep.cells) c = std::max(c, cell.normalized());
  return c;
}

// PAC success ------------------------------------------------------------------

struct PacCell {
  GroupVector groups;
  std::uint64_t budget = 0;
  std::vector<std::size_t> selected;
  std::vector<bool> success;
  std::vector<double> pseudo_regret;
  std::size_t successes = 0;
  Interval wilson;

  double rate() const { return success.empty() ? 0.0 : static_cast<double>(successes) / success.size(); }
};

inline std::uint64_t resolve_budget(const ExperimentConfig& c, const GroupVector& g) {
  if (c.pac.budget > 0) return c.pac.budget;
  PacConfig pc;
  pc.eps = c.pac.eps;
  pc.delta = c.pac.delta;
  pc.regret_constant = c.pac.regret_constant;
  pc.mode = c.pac.mode;
  pc.safety = c.pac.safety;
  return pac_budget(g, pc);
}

inline std::vector<PacCell> pac_experiment(const ExperimentConfig& c) {
  require_common(c);
  std::vector<PacCell> cells;
  for (std::size_t gi = 0; gi < c.groups.size(); ++gi) {
    const GroupVector& g = c.groups[gi];
    const LossSource src = make_source(c.instance, g);
    if (!src.stochastic() || src.threshold) throw ConfigError("pac-success needs a Bernoulli instance");
    const auto rates = rates_for(c, g);
    PacCell cell;
    cell.groups = g;
    cell.budget = resolve_budget(c, g);
    struct Out {
      std::size_t selected = 0;
      double pseudo = 0.0;
    };
    const auto runs = run_parallel<Out>(c.trials, c.workers, [&](std::size_t i) {
      Streams st(cell_trial_seed(c.seed, gi, c.trials, i));
      const PacRun run = run_pac(src.instance, cell.budget, st, rates);
      return Out{run.selected, run.pseudo_regret};
    });
    for (const auto& o : runs) {
      const bool ok = src.instance.eps_optimal(o.selected, c.pac.eps);
      cell.selected.push_back(o.selected);
      cell.success.push_back(ok);
      cell.pseudo_regret.push_back(o.pseudo);
      cell.successes += ok ? 1 : 0;
    }
    cell.wilson = wilson_interval(cell.successes, c.trials);
    cells.push_back(std::move(cell));
  }
  return cells;
}

inline RunReport report_pac(const ExperimentConfig& c, const std::vector<PacCell>& cells) {
  RunReport r = new_report(c);
  Table summary{"summary",
                {"config_hash", "groups", "eps", "budget", "trials", "successes", "rate", "wilson_lo", "wilson_hi",
                 "mean_pseudo_regret"},
                {}};
  Table trials = trials_table();
  for (const auto& cell : cells) {
    summary.rows.push_back({r.config_hash, cell.groups.to_string(), c.pac.eps, cell.budget, cell.success.size(),
                            cell.successes, cell.rate(), cell.wilson.lo, cell.wilson.hi,
                            summarize(cell.pseudo_regret).mean});
    const std::string label = cell_label(cell.groups, cell.budget);
    for (std::size_t i = 0; i < cell.success.size(); ++i) {
      add_trial_rows(trials, r.config_hash, label, i,
                     {{"selected", cell.selected[i] + 1},
                      {"success", cell.success[i]},
                      {"pseudo_regret", cell.pseudo_regret[i]}});
    }
  }
  r.tables = {std::move(summary), std::move(trials)};
  return r;
}

// Distinguisher ----------------------------------------------------------------

struct Confusion {
  std::size_t m = 0;
  std::uint64_t budget = 0;
  std::vector<std::vector<std::size_t>> counts;  // [truth][decision], indices 0..m

  double success_rate(std::size_t truth) const {
    std::size_t n = 0;
    for (std::size_t v : counts[truth]) n += v;
    return n ? static_cast<double>(counts[truth][truth]) / static_cast<double>(n) : 0.0;
  }
};

inline Confusion distinguisher_experiment(const ExperimentConfig& c) {
  require_common(c);
  const GroupVector& g = c.groups.front();
  if (g.groups() != 1) throw ConfigError("distinguisher needs a single group, e.g. [[3]]");
  Confusion conf;
  conf.m = g.arms();
  conf.budget = resolve_budget(c, g);
  conf.counts.assign(conf.m + 1, std::vector<std::size_t>(conf.m + 1, 0));
  for (std::size_t truth = 0; truth <= conf.m; ++truth) {
    const StochasticInstance inst = truth == 0 ? make_h0(conf.m) : make_hj(conf.m, truth - 1, c.pac.eps);
    const auto decisions = run_parallel<std::size_t>(c.trials, c.workers, [&](std::size_t i) {
      Streams st(cell_trial_seed(c.seed, truth, c.trials, i));
      return distinguisher(inst, c.pac.eps, conf.budget, st).hypothesis;
    });
    for (std::size_t d : decisions) ++conf.counts[truth][d];
  }
  return conf;
}

inline RunReport report_distinguisher(const ExperimentConfig& c, const Confusion& conf) {
  RunReport r = new_report(c);
  Table summary{"summary", {"config_hash", "truth", "trials", "correct", "rate", "wilson_lo", "wilson_hi"}, {}};
  Table matrix{"confusion", {"config_hash", "truth"}, {}};
  for (std::size_t d = 0; d <= conf.m; ++d) matrix.columns.push_back("decided_H" + std::to_string(d));
  for (std::size_t truth = 0; truth <= conf.m; ++truth) {
    std::size_t n = 0;
    for (std::size_t v : conf.counts[truth]) n += v;
    const Interval w = wilson_interval(conf.counts[truth][truth], n);
    const std::string label = "H" + std::to_string(truth);
    summary.rows.push_back({r.config_hash, label, n, conf.counts[truth][truth], conf.success_rate(truth), w.lo, w.hi});
    std::vector<json> row{r.config_hash, label};
    for (std::size_t v : conf.counts[truth]) row.emplace_back(v);
    matrix.rows.push_back(std::move(row));
  }
  r.tables = {std::move(summary), std::move(matrix)};
  return r;
}

// Graph adapter ------------------------------------------------------------------

/// Two self-looped cliques {1,2,3} and {4,5} with two cross edges 3 -> 4 and
/// 5 -> 1 that the adapter discards.
inline FeedbackGraph example_graph() {
  FeedbackGraph g = FeedbackGraph::disjoint_cliques({3, 2});
  g.add_edge(2, 3);
  g.add_edge(4, 0);
  return g;
}

struct GraphTrial {
  bool match = false;
  std::string transcript_hash;
  double regret = 0.0;
};

struct GraphExperiment {
  Classification classes;
  CliqueCover cover;
  std::uint64_t horizon = 0;
  std::vector<GraphTrial> trials;
};

namespace detail {

inline std::string hash_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline void append_round(std::string& out, std::size_t t, std::size_t vertex, const std::vector<double>& observed) {
  out += std::to_string(t);
  out += ':';
  out += std::to_string(vertex + 1);
  for (double v : observed) {
    out += ',';
    out += format_double(v);
  }
  out += '\n';
}

}  // namespace detail

/// Plays the graph game through the adapter and, with identical streams, the
/// grouped-feedback game on the cover's groups, and compares transcripts
/// (round, vertex, observed losses) byte for byte.
inline GraphExperiment graph_experiment(const ExperimentConfig& c) {
  require_common(c);
  const FeedbackGraph g = c.graph.empty() ? example_graph() : load_graph(c.graph);
  GraphExperiment ex;
  ex.classes = classify(g);
  ex.cover = greedy_clique_cover(g);
  const GraphAdapter adapter(g, ex.cover);
  ex.horizon = c.horizons.empty() ? 1000 : c.horizons.front();
  const LossSource src = make_source(c.instance, GroupVector({g.vertices()}));
  if (!src.stochastic()) throw ConfigError("graph-adapter needs a stochastic instance");
  const auto rates = rates_for(c, adapter.groups());
  ex.trials = run_parallel<GraphTrial>(c.trials, c.workers, [&](std::size_t i) {
    const std::uint64_t seed = trial_seed(c.seed, i);
    Streams a(seed), b(seed);
    TwoStageState sg = init(adapter.groups(), ex.horizon, rates);
    TwoStageState sd = init(adapter.groups(), ex.horizon, rates);
    std::string tg, td;
    LossVector by_vertex;
    double incurred = 0.0;
    std::vector<double> vertex_losses(g.vertices(), 0.0);
    for (std::uint64_t t = 0; t < ex.horizon; ++t) {
      src.draw(t, a.environment, by_vertex);
      src.draw(t, b.environment, by_vertex);  // keeps the two environment streams in lockstep
      const GraphRound gr = play_graph_round(sg, adapter, by_vertex, a.learner);
      detail::append_round(tg, t, gr.vertex, gr.record.observed);
      const RoundRecord dr = play_round(sd, adapter.to_arm_losses(by_vertex), b.learner);
      detail::append_round(td, t, adapter.vertex_of_arm(dr.arm), dr.observed);
      incurred += gr.record.incurred;
      for (std::size_t v = 0; v < g.vertices(); ++v) vertex_losses[v] += by_vertex[v];
    }
    GraphTrial out;
    out.match = tg == td;
    out.transcript_hash = detail::hash_hex(tg);
    out.regret = incurred - *std::min_element(vertex_losses.begin(), vertex_losses.end());
    return out;
  });
  return ex;
}

inline RunReport report_graph(const ExperimentConfig& c, const GraphExperiment& ex) {
  RunReport r = new_report(c);
  std::size_t matches = 0;
  std::vector<double> regrets;
  for (const auto& t : ex.trials) {
    matches += t.match ? 1 : 0;
    regrets.push_back(t.regret);
  }
  Table summary{"summary",
                {"config_hash", "vertices", "graph_class", "cover", "T", "trials", "transcripts_matching", "mean_regret"},
                {}};
  std::string cover;
  for (const auto& s : ex.cover.sets) {
    cover += '{';
    for (std::size_t i = 0; i < s.size(); ++i) cover += (i ? " " : "") + std::to_string(s[i] + 1);
    cover += '}';
  }
  summary.rows.push_back({r.config_hash, ex.classes.vertex.size(), to_string(ex.classes.graph), cover, ex.horizon,
                          ex.trials.size(), matches, summarize(regrets).mean});
  Table vertices{"vertices", {"config_hash", "vertex", "class"}, {}};
  for (std::size_t v = 0; v < ex.classes.vertex.size(); ++v) {
    vertices.rows.push_back({r.config_hash, v + 1, to_string(ex.classes.vertex[v])});
  }
  Table trials = trials_table();
  for (std::size_t i = 0; i < ex.trials.size(); ++i) {
    add_trial_rows(trials, r.config_hash, "graph", i,
                   {{"match", ex.trials[i].match},
                    {"transcript_hash", ex.trials[i].transcript_hash},
                    {"regret", ex.trials[i].regret}});
  }
  r.tables = {std::move(summary), std::move(trials), std::move(vertices)};
  return r;
}

// Theory tables ------------------------------------------------------------------

inline std::vector<BoundReport> theory_tables(const ExperimentConfig& c) {
  std::vector<BoundReport> rows;
  auto add = [&](std::string name, std::string inputs, double value, std::string tag) {
    rows.push_back({std::move(name), std::move(inputs), value, std::move(tag)});
  };
  const std::vector<GroupVector> groups = c.groups.empty() ? std::vector<GroupVector>{GroupVector{2, 2}} : c.groups;
  const std::vector<std::uint64_t> horizons =
      c.horizons.empty() ? std::vector<std::uint64_t>{1024, 16384} : c.horizons;
  const double eps = c.pac.eps;
  for (const auto& g : groups) {
    for (std::uint64_t t : horizons) {
      add("regret_upper_bound", "m=" + g.to_string() + " T=" + std::to_string(t) + " c=" +
                                    detail::format_double(c.pac.regret_constant),
          regret_upper_bound(g, static_cast<double>(t), c.pac.regret_constant), "upper-bound");
    }
    add("theoretical_T_star", "m=" + g.to_string() + " eps=" + detail::format_double(eps) + " c=" +
                                  detail::format_double(c.pac.regret_constant),
        static_cast<double>(theoretical_T_star(g, eps, c.pac.regret_constant)), "pac");
    add("calibrated_budget", "m=" + g.to_string() + " eps=" + detail::format_double(eps) + " c=" +
                                 detail::format_double(c.pac.regret_constant),
        static_cast<double>(calibrated_budget(g, eps, c.pac.regret_constant, c.pac.delta, c.pac.safety)), "pac");
  }
  add("hoeffding_rounds", "eps=" + detail::format_double(eps) + " delta=0.025",
      static_cast<double>(hoeffding_rounds(eps, kDistinguisherDelta)), "pac");
  for (int i = 1; i <= 12; ++i) {
    const double e = 0.01 * i;
    add("sigma0", "eps=" + detail::format_double(e), solve_sigma0(e), "gaussian-reduction");
  }
  for (std::size_t m : {2, 3}) {
    for (std::size_t t = 1; t <= 5; ++t) {
      for (double e : {0.05, 0.1}) {
        const std::string in =
            "m=" + std::to_string(m) + " t=" + std::to_string(t) + " eps=" + detail::format_double(e);
        add("kl_exact_bruteforce", in, kl_exact_bruteforce(m, e, t), "kl");
        add("kl_bound_bernoulli", in, kl_bound_bernoulli(m, e, static_cast<double>(t)), "kl");
      }
    }
  }
  const double s0 = solve_sigma0(0.1);
  for (std::size_t m : {2, 4, 8}) {
    add("kl_bound_gaussian", "m=" + std::to_string(m) + " eps=0.1 t=100 sigma=sigma0(0.1)",
        kl_bound_gaussian(m, 0.1, 100.0, s0), "kl");
    add("t_star_threshold", "m=" + std::to_string(m) + " eps=0.1 c0=sigma0(0.1)^2",
        t_star_threshold(m, 0.1, s0 * s0), "lower-bound");
  }
  add("weakly_lb_value", "S=(4,4) t=(1,1) T=1000 c'=1", weakly_lb_value({4, 4}, {1.0, 1.0}, 1000.0, 1.0),
      "graph-lower-bound");
  return rows;
}

inline RunReport report_theory(const ExperimentConfig& c, const std::vector<BoundReport>& rows) {
  RunReport r = new_report(c);
  Table summary{"summary", {"config_hash", "name", "inputs", "value", "tag"}, {}};
  for (const auto& b : rows) summary.rows.push_back({r.config_hash, b.name, b.inputs, b.value, b.tag});
  r.tables = {std::move(summary)};
  return r;
}

// -- dispatch ---------------------------------------------------------------------

inline RunReport run_experiment(const ExperimentConfig& c) {
  switch (c.kind) {
    case ExperimentKind::kRegretSweep: return report_regret_sweep(c, regret_sweep(c));
    case ExperimentKind::kCalibrate: {
      const RegretSweep sweep = regret_sweep(c);
      return report_regret_sweep(c, sweep, calibrate_constant(sweep));
    }
    case ExperimentKind::kPacSuccess: return report_pac(c, pac_experiment(c));
    case ExperimentKind::kDistinguisher: return report_distinguisher(c, distinguisher_experiment(c));
    case ExperimentKind::kGraphAdapter: return report_graph(c, graph_experiment(c));
    case ExperimentKind::kTheoryTables: return report_theory(c, theory_tables(c));
  }
  throw ConfigError("unknown experiment");
}

}  // namespace mmab
