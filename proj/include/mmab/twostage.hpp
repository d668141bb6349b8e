#pragma once

// Two-stage online stochastic mirror descent for bandits with grouped
// feedback. Each round the learner
//   1. pulls (k, j) with probability Y(k) * X_k(j),
//   2. observes the losses of every arm in group k,
//   3. forms the importance-weighted estimate l_hat = loss / Y(k) on group k,
//   4. moves X_k by an exponential-weights step at rate eta_k and
//      renormalizes,
//   5. moves Y in inverse-square-root coordinates,
//        1/sqrt(Ybar(k)) = 1/sqrt(Y(k))
//                        + (eta/eta_k) * sum_j X_k(j) (1 - exp(-eta_k l_hat(j))),
//      using the round-start X_k, then projects under the Tsallis potential.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"

#include "mmab/core.hpp"
#include "mmab/potentials.hpp"

namespace mmab {

struct LearningRates {
  double eta = 0.0;
  std::vector<double> etas;

  /// eta = 1/sqrt(T); eta_k = ln(m_k+1) / sqrt(T * sum_j ln(m_j+1)).
  static LearningRates defaults(const GroupVector& groups, std::size_t horizon) {
    if (horizon == 0) throw ParameterError("LearningRates: horizon must be >= 1");
    const double t = static_cast<double>(horizon);
    LearningRates r;
    r.eta = 1.0 / std::sqrt(t);
    const double denom = std::sqrt(t * groups.log_size_sum());
    r.etas.reserve(groups.groups());
    for (std::size_t m : groups.sizes()) r.etas.push_back(std::log(static_cast<double>(m) + 1.0) / denom);
    return r;
  }
};

struct TwoStageState {
  GroupVector groups;
  SimplexDist y;
  std::vector<SimplexDist> xs;
  double eta = 0.0;
  std::vector<double> etas;
  std::size_t t = 0;
  std::size_t horizon = 0;

  friend bool operator==(const TwoStageState&, const TwoStageState&) = default;
};

struct RoundRecord {
  std::size_t t = 0;
  std::size_t arm = 0;  // flat index
  ArmIndex pulled;
  std::vector<double> observed;  // losses of every arm in the pulled group
  double incurred = 0.0;

  friend bool operator==(const RoundRecord&, const RoundRecord&) = default;
};

inline TwoStageState init(const GroupVector& groups, std::size_t horizon,
                          std::optional<LearningRates> overrides = std::nullopt) {
  if (horizon == 0) throw ParameterError("init: horizon must be >= 1");
  LearningRates rates = overrides ? *overrides : LearningRates::defaults(groups, horizon);
  if (!(rates.eta > 0.0)) throw ParameterError("init: eta must be positive");
  if (rates.etas.size() != groups.groups()) throw ShapeError("init: one inner rate per group required");
  for (double e : rates.etas) {
    if (!(e > 0.0)) throw ParameterError("init: inner rates must be positive");
  }
  TwoStageState s;
  s.groups = groups;
  s.y = SimplexDist::uniform(groups.groups());
  s.xs.reserve(groups.groups());
  for (std::size_t m : groups.sizes()) s.xs.push_back(SimplexDist::uniform(m));
  s.eta = rates.eta;
  s.etas = std::move(rates.etas);
  s.horizon = horizon;
  return s;
}

/// Draws a flat arm from Z = Y * X_k. Equivalent to
/// sample_index(z_distribution(...)) on the same stream, without building Z.
inline std::size_t select(const TwoStageState& s, Rng& rng) {
  const double u = uniform01(rng);
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t k = 0; k < s.groups.groups(); ++k) {
    const double yk = s.y[k];
    const std::vector<double>& xk = s.xs[k].vec();
    const std::size_t base = s.groups.offset(k);
    for (std::size_t j = 0; j < xk.size(); ++j) {
      const double z = yk * xk[j];
      if (z > 0.0) {
        cumulative += z;
        last_positive = base + j;
        if (u < cumulative) return base + j;
      }
    }
  }
  return last_positive;
}

/// Importance-weighted estimate for the pulled group; zero elsewhere.
inline std::vector<double> estimate(const TwoStageState& s, std::size_t k, std::span<const double> observed) {
  if (k >= s.groups.groups()) throw IndexError("estimate: group out of range");
  if (observed.size() != s.groups.size(k)) throw ShapeError("estimate: observation size mismatch");
  const double yk = s.y[k];
  if (!(yk >= kProbabilityFloor)) throw NumericError("estimate: group probability below floor");
  std::vector<double> est(observed.size());
  for (std::size_t j = 0; j < observed.size(); ++j) est[j] = observed[j] / yk;
  return est;
}

/// Unnormalized mirror step X_k(j) * exp(-eta_k * l_hat(j)).
inline std::vector<double> x_bar(const TwoStageState& s, std::size_t k, std::span<const double> est) {
  const std::vector<double>& x = s.xs.at(k).vec();
  if (est.size() != x.size()) throw ShapeError("x_bar: estimate size mismatch");
  std::vector<double> out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = x[j] * std::exp(-s.etas[k] * est[j]);
  return out;
}

/// The un-projected outer iterate for a round in which group k was pulled.
/// Entries for other groups are the current Y.
inline std::vector<double> y_bar(const TwoStageState& s, std::size_t k, std::span<const double> est) {
  std::vector<double> out(s.y.vec());
  const std::vector<double>& x = s.xs.at(k).vec();
  if (est.size() != x.size()) throw ShapeError("y_bar: estimate size mismatch");
  double drift = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) drift += x[j] * -std::expm1(-s.etas[k] * est[j]);
  const double inv_sqrt = 1.0 / std::sqrt(s.y[k]) + (s.eta / s.etas[k]) * drift;
  out[k] = 1.0 / (inv_sqrt * inv_sqrt);
  return out;
}

/// New X_k after the entropic step and normalization. Weights are shifted by
/// the smallest estimate first (projection is scale invariant), then floored.
inline SimplexDist x_update(const TwoStageState& s, std::size_t k, std::span<const double> est) {
  const std::vector<double>& x = s.xs.at(k).vec();
  if (est.size() != x.size()) throw ShapeError("x_update: estimate size mismatch");
  const double shift = *std::min_element(est.begin(), est.end());
  std::vector<double> w(x.size());
  double total = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    w[j] = x[j] * std::exp(-s.etas[k] * (est[j] - shift));
    total += w[j];
  }
  bool floored = false;
  for (double& v : w) {
    v /= total;
    if (v < kProbabilityFloor) {
      v = kProbabilityFloor;
      floored = true;
    }
  }
  return floored ? SimplexDist::normalized(std::move(w)) : SimplexDist(std::move(w));
}

/// New Y. Only group k moves before projection; the step uses the
/// round-start X_k held in the state.
inline SimplexDist y_update(const TwoStageState& s, std::size_t k, std::span<const double> est) {
  const std::vector<double>& x = s.xs.at(k).vec();
  if (est.size() != x.size()) throw ShapeError("y_update: estimate size mismatch");
  // Work directly in inverse-square-root coordinates; a_k = 1/sqrt(Ybar(k)).
  std::vector<double> a(s.groups.groups());
  for (std::size_t g = 0; g < a.size(); ++g) a[g] = 1.0 / std::sqrt(s.y[g]);
  double drift = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) drift += x[j] * -std::expm1(-s.etas[k] * est[j]);
  a[k] += (s.eta / s.etas[k]) * drift;
  return detail::tsallis_from_inv_sqrt(a).point;
}

/// One full round against a loss vector chosen before the pull. Only the
/// pulled group's entries are read.
inline RoundRecord play_round(TwoStageState& s, const LossVector& losses, Rng& rng) {
  if (s.t >= s.horizon) throw StateError("play_round: horizon exceeded");
  if (losses.size() != s.groups.arms()) throw ShapeError("play_round: loss vector size mismatch");
  if (losses.range != LossRange::kUnitInterval) throw DomainError("play_round: losses must be unit-interval");

  RoundRecord rec;
  rec.t = s.t;
  rec.arm = select(s, rng);
  rec.pulled = s.groups.unflatten(rec.arm);
  const std::size_t k = rec.pulled.group;
  const std::size_t base = s.groups.offset(k);
  rec.observed.assign(losses.values.begin() + static_cast<std::ptrdiff_t>(base),
                      losses.values.begin() + static_cast<std::ptrdiff_t>(base + s.groups.size(k)));
  rec.incurred = rec.observed[rec.pulled.within];

  const std::vector<double> est = estimate(s, k, rec.observed);
  SimplexDist new_x = x_update(s, k, est);
  SimplexDist new_y = y_update(s, k, est);
  s.xs[k] = std::move(new_x);
  s.y = std::move(new_y);
  ++s.t;
  return rec;
}

using LossOracle = std::function<LossVector(std::size_t round)>;

inline RoundRecord play_round(TwoStageState& s, const LossOracle& oracle, Rng& rng) {
  if (s.t >= s.horizon) throw StateError("play_round: horizon exceeded");
  return play_round(s, oracle(s.t), rng);
}

// -- snapshot serialization ----------------------------------------------------

inline nlohmann::json to_json(const TwoStageState& s) {
  nlohmann::json xs = nlohmann::json::array();
  for (const auto& x : s.xs) xs.push_back(x.vec());
  return {{"m", s.groups.sizes()}, {"t", s.t},       {"T", s.horizon}, {"eta", s.eta},
          {"eta_k", s.etas},       {"Y", s.y.vec()}, {"X", xs}};
}

inline TwoStageState state_from_json(const nlohmann::json& j) {
  TwoStageState s;
  s.groups = GroupVector(j.at("m").get<std::vector<std::size_t>>());
  s.t = j.at("t").get<std::size_t>();
  s.horizon = j.at("T").get<std::size_t>();
  s.eta = j.at("eta").get<double>();
  s.etas = j.at("eta_k").get<std::vector<double>>();
  s.y = SimplexDist(j.at("Y").get<std::vector<double>>());
  for (const auto& x : j.at("X")) s.xs.emplace_back(x.get<std::vector<double>>());
  if (s.y.dim() != s.groups.groups() || s.xs.size() != s.groups.groups() || s.etas.size() != s.groups.groups()) {
    throw ShapeError("state_from_json: dimension mismatch");
  }
  for (std::size_t k = 0; k < s.xs.size(); ++k) {
    if (s.xs[k].dim() != s.groups.size(k)) throw ShapeError("state_from_json: inner dimension mismatch");
  }
  if (s.t > s.horizon) throw StateError("state_from_json: t exceeds T");
  return s;
}

}  // namespace mmab
