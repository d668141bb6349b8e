#pragma once

// Best-arm identification through the regret learner: run it for a fixed
// budget, then output an arm drawn from the empirical pull frequencies.
// Also the budget formulas and the hypothesis-testing distinguisher built
// on top of a PAC run.

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "mmab/core.hpp"
#include "mmab/environments.hpp"
#include "mmab/twostage.hpp"

namespace mmab {

enum class BudgetMode { kTheoretical, kCalibrated };

struct PacConfig {
  double eps = 0.1;
  double delta = 0.05;
  double regret_constant = 1.0;  // c in R(T) <= c sqrt(T sum ln(m_k+1))
  BudgetMode mode = BudgetMode::kCalibrated;
  double safety = 2.0;  // calibrated mode only

  void validate() const {
    if (!(eps > 0.0 && eps < 1.0)) throw ParameterError("PacConfig: eps must lie in (0,1)");
    if (!(delta > 0.0 && delta < 1.0)) throw ParameterError("PacConfig: delta must lie in (0,1)");
    if (!(regret_constant > 0.0)) throw ParameterError("PacConfig: regret constant must be positive");
    if (!(safety > 0.0)) throw ParameterError("PacConfig: safety factor must be positive");
  }
};

struct PullCounts {
  std::vector<std::uint64_t> per_arm;
  std::vector<std::uint64_t> per_group;
  std::uint64_t total = 0;

  explicit PullCounts(const GroupVector& g) : per_arm(g.arms(), 0), per_group(g.groups(), 0) {}
  PullCounts() = default;

  void record(const ArmIndex& a, std::size_t flat) {
    ++per_arm[flat];
    ++per_group[a.group];
    ++total;
  }

  /// Sum identities between arm, group and total counts.
  bool consistent(const GroupVector& g) const {
    std::uint64_t sum = 0;
    for (std::size_t k = 0; k < g.groups(); ++k) {
      std::uint64_t in_group = 0;
      for (std::size_t j = 0; j < g.size(k); ++j) in_group += per_arm[g.offset(k) + j];
      if (in_group != per_group[k]) return false;
      sum += in_group;
    }
    return sum == total;
  }

  /// Observations of arm (k, j): every pull of group k reveals it.
  std::uint64_t observations(const GroupVector& g, std::size_t flat) const {
    return per_group[g.unflatten(flat).group];
  }
};

/// ceil((2500 c)^2 * sum_k ln(m_k+1) / eps^2).
inline std::uint64_t theoretical_T_star(const GroupVector& groups, double eps, double c) {
  if (!(eps > 0.0 && eps < 1.0)) throw ParameterError("theoretical_T_star: eps must lie in (0,1)");
  if (!(c > 0.0)) throw ParameterError("theoretical_T_star: c must be positive");
  const double scale = 2500.0 * c;
  return static_cast<std::uint64_t>(std::ceil(scale * scale * groups.log_size_sum() / (eps * eps)));
}

/// Budget at which the reduction's bound on the wrong-output probability,
/// c sqrt(T S) / (eps T), reaches delta, times a safety factor:
///   ceil(safety * (c / (delta eps))^2 * S),  S = sum_k ln(m_k+1).
/// c is an empirical regret constant from calibration runs.
inline std::uint64_t calibrated_budget(const GroupVector& groups, double eps, double c_hat, double delta = 0.05,
                                       double safety = 2.0) {
  if (!(eps > 0.0) || !(c_hat > 0.0) || !(delta > 0.0) || !(safety > 0.0)) {
    throw ParameterError("calibrated_budget: positive inputs required");
  }
  const double r = c_hat / (delta * eps);
  return static_cast<std::uint64_t>(std::ceil(safety * r * r * groups.log_size_sum()));
}

inline std::uint64_t pac_budget(const GroupVector& groups, const PacConfig& cfg) {
  cfg.validate();
  return cfg.mode == BudgetMode::kTheoretical
             ? theoretical_T_star(groups, cfg.eps, cfg.regret_constant)
             : calibrated_budget(groups, cfg.eps, cfg.regret_constant, cfg.delta, cfg.safety);
}

/// ceil(2 ln(1/delta) / eps^2).
inline std::uint64_t hoeffding_rounds(double eps, double delta) {
  if (!(eps > 0.0 && eps <= 1.0) || !(delta > 0.0 && delta <= 1.0)) {
    throw ParameterError("hoeffding_rounds: eps and delta must lie in (0,1]");
  }
  return static_cast<std::uint64_t>(std::ceil(2.0 * std::log(1.0 / delta) / (eps * eps)));
}

/// Draws an arm with probability T_i / T using one auxiliary draw.
inline std::size_t sample_from_counts(const PullCounts& counts, Rng& rng) {
  if (counts.total == 0) throw StateError("sample_from_counts: no pulls recorded");
  auto r = static_cast<std::uint64_t>(uniform01(rng) * static_cast<double>(counts.total));
  if (r >= counts.total) r = counts.total - 1;
  for (std::size_t i = 0; i < counts.per_arm.size(); ++i) {
    if (r < counts.per_arm[i]) return i;
    r -= counts.per_arm[i];
  }
  return counts.per_arm.size() - 1;
}

struct PacRun {
  std::size_t selected = 0;
  PullCounts counts;
  double pseudo_regret = 0.0;  // sum over pulls of (mean gap), for reporting
};

/// Runs the learner for `budget` rounds on a Bernoulli instance, then samples
/// the output from the empirical pull distribution.
inline PacRun run_pac(const StochasticInstance& instance, std::uint64_t budget, Streams& streams,
                      std::optional<LearningRates> rates = std::nullopt) {
  if (budget == 0) throw ParameterError("run_pac: budget must be >= 1");
  if (!instance.bernoulli()) throw ParameterError("run_pac: instance must have bounded (Bernoulli) losses");
  const GroupVector& groups = instance.groups;
  TwoStageState state = init(groups, budget, std::move(rates));
  PacRun run;
  run.counts = PullCounts(groups);
  LossVector losses;
  for (std::uint64_t t = 0; t < budget; ++t) {
    sample_round_into(instance, streams.environment, losses);
    const RoundRecord rec = play_round(state, losses, streams.learner);
    run.counts.record(rec.pulled, rec.arm);
  }
  const double best = instance.arms[instance.best_arm()].mean;
  for (std::size_t i = 0; i < instance.size(); ++i) {
    run.pseudo_regret += static_cast<double>(run.counts.per_arm[i]) * (instance.arms[i].mean - best);
  }
  run.selected = sample_from_counts(run.counts, streams.aux);
  return run;
}

inline constexpr double kDistinguisherDelta = 0.025;

struct DistinguisherRun {
  std::size_t hypothesis = 0;  // 0 for H_0, j >= 1 for H_j (1-based arm)
  std::size_t pac_arm = 0;
  double empirical_mean = 0.0;
  std::uint64_t extra_rounds = 0;
};

/// Decides among H_0, H_1, ..., H_m for a single group of m arms: a PAC run
/// nominates arm i, further rounds estimate its mean, and the answer is H_i
/// when that mean is at most 1/2 - eps/2, otherwise H_0.
inline DistinguisherRun distinguisher(const StochasticInstance& instance, double eps, std::uint64_t pac_budget,
                                      Streams& streams) {
  if (instance.groups.groups() != 1) throw ParameterError("distinguisher: instance must be a single group");
  DistinguisherRun out;
  const PacRun pac = run_pac(instance, pac_budget, streams);
  out.pac_arm = pac.selected;
  out.extra_rounds = hoeffding_rounds(eps, kDistinguisherDelta);
  double sum = 0.0;
  LossVector losses;
  for (std::uint64_t r = 0; r < out.extra_rounds; ++r) {
    sample_round_into(instance, streams.environment, losses);
    sum += losses[out.pac_arm];
  }
  out.empirical_mean = sum / static_cast<double>(out.extra_rounds);
  out.hypothesis = out.empirical_mean <= 0.5 - eps / 2.0 ? out.pac_arm + 1 : 0;
  return out;
}

}  // namespace mmab
