// Acceptance gate: one PASS/FAIL line per criterion; exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mmab/mmab.hpp"

using namespace mmab;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::size_t workers() { return std::max(1u, std::thread::hardware_concurrency()); }

std::string fmt(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::vector<double> random_positive(Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = lo * std::pow(hi / lo, uniform01(rng));
  return v;
}

std::vector<double> random_simplex(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  double s = 0.0;
  for (auto& x : v) s += x = -std::log(1.0 - uniform01(rng));
  for (auto& x : v) x /= s;
  return v;
}

LossVector random_losses(Rng& rng, std::size_t n) {
  LossVector l;
  l.values.resize(n);
  for (auto& v : l.values) v = uniform01(rng);
  return l;
}

ExperimentConfig sweep_config(std::vector<GroupVector> groups, std::vector<std::uint64_t> horizons, std::size_t trials,
                              double eps, std::uint64_t seed) {
  ExperimentConfig c;
  c.kind = ExperimentKind::kRegretSweep;
  c.groups = std::move(groups);
  c.horizons = std::move(horizons);
  c.trials = trials;
  c.seed = seed;
  c.instance.kind = "hj";
  c.instance.eps = eps;
  c.workers = workers();
  return c;
}

Verdict ac1_sqrt_scaling() {
  const auto c = sweep_config({GroupVector{8, 8}, GroupVector{2, 2, 2, 2}, GroupVector{64}}, {1u << 10, 1u << 12, 1u << 14, 1u << 16},
                              200, 0.1, 101);
  const auto t0 = std::chrono::steady_clock::now();
  const RegretSweep sweep = regret_sweep(c);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  Verdict v{true, ""};
  for (std::size_t k = 0; k < c.groups.size(); ++k) {
    const auto& f = sweep.fits[k];
    const bool ok = f && f->slope >= 0.45 && f->slope <= 0.55;
    v.pass = v.pass && ok;
    v.detail += c.groups[k].to_string() + " slope=" + (f ? fmt(f->slope, 4) : std::string("n/a")) + " ";
  }
  v.detail += "(" + fmt(secs, 3) + " s)";
  return v;
}

Verdict ac2_group_structure() {
  std::vector<GroupVector> groups{GroupVector{2, 2}, GroupVector{8, 8}, GroupVector{64}, GroupVector{2, 2, 2, 2},
                                  GroupVector(std::vector<std::size_t>(16, 1))};
  const auto c = sweep_config(groups, {1u << 14}, 200, 0.1, 202);
  const RegretSweep sweep = regret_sweep(c);
  double lo = INFINITY, hi = 0.0;
  std::string detail;
  for (const auto& cell : sweep.cells) {
    lo = std::min(lo, cell.normalized());
    hi = std::max(hi, cell.normalized());
    detail += cell.groups.to_string() + "=" + fmt(cell.normalized(), 4) + " ";
  }
  return {hi / lo <= 2.0, detail + "max/min=" + fmt(hi / lo, 4)};
}

Verdict ac3_degenerate() {
  double worst = 0.0;
  for (std::size_t n : {2, 6, 64}) {
    auto s = init(GroupVector{n}, 1000);
    const double eta1 = s.etas[0];
    Rng rng(300 + n), env(400 + n);
    std::vector<double> cumulative(n, 0.0);
    for (int t = 0; t < 1000; ++t) {
      const LossVector l = random_losses(env, n);
      play_round(s, l, rng);
      for (std::size_t i = 0; i < n; ++i) cumulative[i] += l[i];
      const double m = *std::min_element(cumulative.begin(), cumulative.end());
      std::vector<double> hedge(n);
      double z = 0.0;
      for (std::size_t i = 0; i < n; ++i) z += hedge[i] = std::exp(-eta1 * (cumulative[i] - m));
      for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(s.xs[0][i] - hedge[i] / z));
    }
  }
  bool singletons_fixed = true;
  auto s = init(GroupVector(std::vector<std::size_t>(8, 1)), 1000);
  Rng rng(501), env(502);
  for (int t = 0; t < 1000; ++t) {
    play_round(s, random_losses(env, 8), rng);
    for (const auto& x : s.xs) singletons_fixed = singletons_fixed && x.dim() == 1 && x[0] == 1.0;
  }
  return {worst <= 1e-12 && singletons_fixed,
          "hedge max dev=" + fmt(worst, 3) + ", singleton X fixed=" + (singletons_fixed ? "yes" : "no")};
}

Verdict ac4_unbiased() {
  Rng rng(4);
  double worst = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    std::vector<std::size_t> sizes(1 + rng() % 6);
    for (auto& m : sizes) m = 1 + rng() % 5;
    auto s = init(GroupVector(sizes), 100);
    std::vector<double> w(sizes.size());
    for (auto& v : w) v = 0.01 + uniform01(rng);
    s.y = SimplexDist::normalized(w);
    const LossVector l = random_losses(rng, s.groups.arms());
    for (std::size_t k = 0; k < s.groups.groups(); ++k) {
      const auto first = l.values.begin() + static_cast<std::ptrdiff_t>(s.groups.offset(k));
      const std::vector<double> obs(first, first + static_cast<std::ptrdiff_t>(s.groups.size(k)));
      const auto est = estimate(s, k, obs);
      // Only the outcome k_t = k contributes to group k's coordinates.
      for (std::size_t j = 0; j < obs.size(); ++j) worst = std::max(worst, std::abs(s.y[k] * est[j] - obs[j]));
    }
  }
  return {worst <= 1e-12, "max |sum_k Y(k) l_hat - l|=" + fmt(worst, 3)};
}

Verdict ac5_projections() {
  Rng rng(5);
  double simplex = 0.0, station = 0.0, pyth = 0.0;
  for (int rep = 0; rep < 10000; ++rep) {
    const std::size_t n = 1 + rng() % 64;
    const TsallisPotential p(0.05 + uniform01(rng));
    const auto ybar = random_positive(rng, n, 1e-3 / static_cast<double>(n), 2.0);
    const auto y = project_tsallis(p, ybar).point;
    double total = 0.0;
    for (double v : y.probs()) total += v;
    simplex = std::max(simplex, std::abs(total - 1.0));
    // Stationarity: grad psi(y) - grad psi(ybar) is constant (unit-eta scale).
    const auto gy = TsallisPotential(1.0).grad(y.vec());
    const auto gb = TsallisPotential(1.0).grad(ybar);
    for (std::size_t i = 0; i < n; ++i) station = std::max(station, std::abs((gy[i] - gb[i]) - (gy[0] - gb[0])));
    // B(x, ybar) >= B(x, y) + B(y, ybar) for x in the simplex.
    const auto x = random_simplex(rng, n);
    const double lhs = bregman(p, x, ybar);
    const double rhs = bregman(p, x, y.vec()) + bregman(p, y.vec(), ybar);
    pyth = std::max(pyth, (rhs - lhs) / (1.0 + std::abs(lhs)));
  }
  const bool ok = simplex <= 1e-12 && station <= 1e-9 && pyth <= 1e-9;
  return {ok, "simplex=" + fmt(simplex, 3) + " stationarity=" + fmt(station, 3) + " pythagoras slack=" + fmt(pyth, 3)};
}

Verdict ac6_ode() {
  double worst = 0.0;
  for (const GroupVector& g : {GroupVector{2, 2}, GroupVector{3, 1}, GroupVector{5}, GroupVector{1, 1, 1, 1}}) {
    auto s = init(g, 1000);
    Rng rng(600 + g.arms()), env(700 + g.arms()), pick(800 + g.arms());
    for (int round = 0; round < 100; ++round) {
      const LossVector l = random_losses(env, g.arms());
      const std::size_t k = g.unflatten(select(s, pick)).group;
      const auto first = l.values.begin() + static_cast<std::ptrdiff_t>(g.offset(k));
      const std::vector<double> obs(first, first + static_cast<std::ptrdiff_t>(g.size(k)));
      worst = std::max(worst, ode_consistency_check(s, k, estimate(s, k, obs)).max_deviation);
      play_round(s, l, rng);
    }
  }
  return {worst <= 1e-6, "max deviation=" + fmt(worst, 3)};
}

Verdict ac7_pac() {
  auto cal = sweep_config({GroupVector{4, 4}}, {1u << 10, 1u << 12, 1u << 14}, 100, 0.15, 707);
  cal.kind = ExperimentKind::kCalibrate;
  const double c_hat = calibrate_constant(regret_sweep(cal));

  ExperimentConfig c;
  c.kind = ExperimentKind::kPacSuccess;
  c.groups = {GroupVector{4, 4}};
  c.instance.kind = "hj";
  c.instance.eps = 0.15;
  c.pac.eps = 0.15;
  c.pac.delta = 0.05;
  c.pac.regret_constant = c_hat;
  c.pac.mode = BudgetMode::kCalibrated;
  c.pac.safety = 2.0;
  c.trials = 300;
  c.seed = 708;
  c.workers = workers();
  const PacCell cell = pac_experiment(c).front();
  const bool ok = cell.rate() >= 0.90 && cell.wilson.lo >= 0.85;
  return {ok, "c_hat=" + fmt(c_hat, 4) + " budget=" + std::to_string(cell.budget) + " rate=" + fmt(cell.rate(), 4) +
                  " wilson_lo=" + fmt(cell.wilson.lo, 4)};
}

Verdict ac8_kl() {
  double slack = -INFINITY;
  for (std::size_t m : {2, 3})
    for (std::size_t t = 1; t <= 5; ++t)
      for (double eps : {0.05, 0.1}) {
        slack = std::max(slack, kl_exact_bruteforce(m, eps, t) - kl_bound_bernoulli(m, eps, static_cast<double>(t)));
      }
  const double one = kl_exact_bruteforce(1, 0.1, 1);
  return {slack <= 1e-12 && std::abs(one - 0.020136) <= 1e-6,
          "max(exact - bound)=" + fmt(slack, 3) + " kl_exact(1,0.1,1)=" + fmt(one, 8)};
}

Verdict ac9_sigma0() {
  double residual = 0.0, mean_dev = 0.0;
  bool inside = true;
  for (int i = 1; i <= 12; ++i) {
    const double eps = 0.01 * i;
    const double s = solve_sigma0(eps);
    residual = std::max(residual, std::abs(normal_cdf(eps / s) - 0.5 - eps));
    inside = inside && s > 0.199471 && s < 0.398942;
    const auto inst = make_gaussian_nj(1, 1, eps, s);
    Rng rng(900 + i);
    double sum = 0.0;
    const int draws = 1'000'000;
    for (int d = 0; d < draws; ++d) sum += gaussian_to_bernoulli(sample_round(inst, rng)[0]);
    mean_dev = std::max(mean_dev, std::abs(sum / draws - (0.5 - eps)));
  }
  return {residual <= 1e-10 && inside && mean_dev <= 0.002,
          "max residual=" + fmt(residual, 3) + " in interval=" + (inside ? "yes" : "no") +
              " max |mean - (1/2 - eps)|=" + fmt(mean_dev, 3)};
}

Verdict ac10_graph() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "mmab_acceptance_graphs";
  fs::create_directories(dir);
  std::vector<std::pair<std::string, FeedbackGraph>> graphs;
  graphs.emplace_back("cliques(3,2,4)", FeedbackGraph::disjoint_cliques({3, 2, 4}));
  graphs.emplace_back("complete(5)", FeedbackGraph::complete(5));
  graphs.emplace_back("singletons(4)", FeedbackGraph::disjoint_cliques({1, 1, 1, 1}));
  FeedbackGraph cross = FeedbackGraph::disjoint_cliques({3, 3, 2});
  cross.add_edge(0, 3);
  cross.add_edge(4, 7);
  cross.add_edge(6, 1);
  graphs.emplace_back("cliques(3,3,2)+cross", cross);
  FeedbackGraph dense = FeedbackGraph::disjoint_cliques({2, 4});
  for (std::size_t u = 0; u < 2; ++u)
    for (std::size_t v = 2; v < 6; ++v) dense.add_edge(u, v);
  graphs.emplace_back("cliques(2,4)+one-way", dense);

  std::size_t matched = 0, total = 0;
  std::string detail;
  for (const auto& [name, g] : graphs) {
    const fs::path path = dir / (std::to_string(total) + ".graph");
    std::ofstream(path) << format_graph(g);
    ExperimentConfig c;
    c.kind = ExperimentKind::kGraphAdapter;
    c.graph = path.string();
    c.instance.kind = "hj";
    c.instance.eps = 0.2;
    c.horizons = {2000};
    c.trials = 10;
    c.seed = 1000 + total;
    const GraphExperiment ex = graph_experiment(c);
    std::size_t ok = 0;
    for (const auto& t : ex.trials) ok += t.match ? 1 : 0;
    matched += ok == ex.trials.size() ? 1 : 0;
    ++total;
    detail += name + ":" + std::to_string(ok) + "/" + std::to_string(ex.trials.size()) + " ";
  }
  fs::remove_all(dir);
  return {matched == total, detail};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Verdict ac11_determinism() {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "mmab_acceptance_determinism";
  fs::remove_all(root);
  std::vector<ExperimentConfig> configs;
  {
    auto c = sweep_config({GroupVector{2, 2}, GroupVector{1, 1, 1}}, {200, 800}, 12, 0.1, 1);
    configs.push_back(c);
    c.kind = ExperimentKind::kCalibrate;
    configs.push_back(c);
    c.kind = ExperimentKind::kRegretSweep;
    c.instance.kind = "gaussian_thresholded";
    c.groups = {GroupVector{3, 2}};
    configs.push_back(c);
  }
  {
    ExperimentConfig c;
    c.kind = ExperimentKind::kPacSuccess;
    c.groups = {GroupVector{2, 2}};
    c.instance.eps = 0.2;
    c.pac.eps = 0.2;
    c.pac.budget = 500;
    c.trials = 20;
    c.seed = 2;
    configs.push_back(c);
    c.kind = ExperimentKind::kDistinguisher;
    c.groups = {GroupVector{3}};
    c.pac.budget = 300;
    c.trials = 6;
    configs.push_back(c);
  }
  {
    ExperimentConfig c;
    c.kind = ExperimentKind::kGraphAdapter;
    c.horizons = {300};
    c.trials = 5;
    c.seed = 3;
    configs.push_back(c);
    c.kind = ExperimentKind::kTheoryTables;
    configs.push_back(c);
  }
  std::size_t identical = 0;
  std::string detail;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    std::vector<std::vector<std::string>> runs;
    for (std::size_t w : {std::size_t{1}, std::size_t{1}, std::size_t{3}}) {
      auto c = configs[i];
      c.workers = w;
      const fs::path out = root / (std::to_string(i) + "_" + std::to_string(runs.size()));
      std::vector<std::string> bytes;
      for (const auto& path : emit(run_experiment(c), out.string())) bytes.push_back(slurp(path));
      runs.push_back(std::move(bytes));
    }
    const bool same = runs[0] == runs[1] && runs[0] == runs[2] && !runs[0].empty();
    identical += same ? 1 : 0;
    detail += std::string(to_string(configs[i].kind)) + (same ? ":same " : ":DIFFERENT ");
  }
  fs::remove_all(root);
  return {identical == configs.size(), detail};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Verdict()>> criteria[] = {
      {"AC1 sqrt(T) regret scaling", ac1_sqrt_scaling},
      {"AC2 group-structure constant stability", ac2_group_structure},
      {"AC3 degenerate equivalences", ac3_degenerate},
      {"AC4 estimator unbiasedness", ac4_unbiased},
      {"AC5 Tsallis projection", ac5_projections},
      {"AC6 ODE/discrete consistency", ac6_ode},
      {"AC7 PAC success at calibrated budget", ac7_pac},
      {"AC8 KL oracle vs bound", ac8_kl},
      {"AC9 sigma_0 solver and thresholding", ac9_sigma0},
      {"AC10 graph adapter transcripts", ac10_graph},
      {"AC11 harness determinism", ac11_determinism},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failures += v.pass ? 0 : 1;
    std::printf("%s %s: %s\n", v.pass ? "PASS" : "FAIL", name, v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, std::size(criteria));
  return failures == 0 ? 0 : 1;
}
