#pragma once

// Closed-form bound evaluators, the sigma_0 solver for the Gaussian to
// Bernoulli reduction, KL oracles (closed form and brute-force
// enumeration), and a numeric check that one discrete learner step equals
// the endpoint of the continuous mirror-descent flow started at the same
// state.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mmab/core.hpp"
#include "mmab/twostage.hpp"

namespace mmab {

struct BoundReport {
  std::string name;
  std::string inputs;
  double value = 0.0;
  std::string tag;  // which family of results the formula belongs to
};

/// c * sqrt(T * sum_k ln(m_k + 1)).
inline double regret_upper_bound(const GroupVector& groups, double horizon, double c) {
  if (horizon < 0.0 || !(c > 0.0)) throw ParameterError("regret_upper_bound: need T >= 0 and c > 0");
  return c * std::sqrt(horizon * groups.log_size_sum());
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline constexpr double kSigmaResidualTolerance = 1e-10;

/// The sigma in (1/(2 sqrt(2 pi)), 1/sqrt(2 pi)) with Phi(eps/sigma) - 1/2 = eps,
/// i.e. the N(-eps, sigma^2) mass on [-eps, 0] equals eps.
inline double solve_sigma0(double eps, bool strict = true) {
  if (!(eps > 0.0)) throw ParameterError("solve_sigma0: eps must be positive");
  if (strict && !(eps < 0.125)) throw ParameterError("solve_sigma0: eps must be below 1/8");
  double lo = 1.0 / (2.0 * std::sqrt(2.0 * M_PI));
  double hi = 1.0 / std::sqrt(2.0 * M_PI);
  // Decreasing in sigma: positive at lo, negative at hi.
  auto residual = [eps](double sigma) { return normal_cdf(eps / sigma) - 0.5 - eps; };
  // For tiny eps the root sits within rounding of hi, where the residual
  // evaluates to about zero rather than strictly negative.
  if (!(residual(lo) > 0.0 && residual(hi) <= kSigmaResidualTolerance)) {
    throw ParameterError("solve_sigma0: no root in the bracket");
  }
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    mid = 0.5 * (lo + hi);
    const double r = residual(mid);
    if (std::abs(r) <= kSigmaResidualTolerance * 1e-3 || hi - lo <= 1e-17) break;
    if (r > 0.0) lo = mid; else hi = mid;
  }
  if (std::abs(residual(mid)) > kSigmaResidualTolerance) throw NumericError("solve_sigma0: bisection stalled");
  return mid;
}

namespace detail {

// ln((m - 1 + e^x) / m) without overflowing e^x.
inline double log_mix_exp(std::size_t m, double x) {
  if (m == 0) throw ParameterError("mixture size must be >= 1");
  if (m == 1) return x;
  if (x < 700.0) return std::log1p(std::expm1(x) / static_cast<double>(m));
  const double lm1 = std::log(static_cast<double>(m - 1));
  const double hi = std::max(x, lm1);
  return hi + std::log1p(std::exp(-std::abs(x - lm1))) - std::log(static_cast<double>(m));
}

}  // namespace detail

/// ln((m - 1 + exp(eps^2 t / sigma^2)) / m).
inline double kl_bound_gaussian(std::size_t m, double eps, double t, double sigma) {
  if (m == 0 || t < 0.0 || !(sigma > 0.0)) throw ParameterError("kl_bound_gaussian: need m >= 1, t >= 0, sigma > 0");
  return detail::log_mix_exp(m, eps * eps * t / (sigma * sigma));
}

/// Bernoulli analogue, ln((m - 1 + (1 + 4 eps^2)^t) / m).
inline double kl_bound_bernoulli(std::size_t m, double eps, double t) {
  if (m == 0 || t < 0.0 || !(eps > 0.0 && eps < 0.5)) {
    throw ParameterError("kl_bound_bernoulli: need m >= 1, t >= 0, eps in (0, 1/2)");
  }
  return detail::log_mix_exp(m, t * std::log1p(4.0 * eps * eps));
}

inline constexpr std::size_t kBruteForceLimit = 20;

/// Exact KL(P_mix || P_0) for t rounds of full observation of m arms, where
/// P_0 is all fair coins and P_mix picks a uniformly random arm to be
/// Ber(1/2 - eps). Enumerates every outcome in {0,1}^(m t).
inline double kl_exact_bruteforce(std::size_t m, double eps, std::size_t t) {
  if (m == 0) throw ParameterError("kl_exact_bruteforce: m must be >= 1");
  if (m * t > kBruteForceLimit) throw ParameterError("kl_exact_bruteforce: m * t exceeds the enumeration limit");
  if (!(eps > 0.0 && eps < 0.5)) throw ParameterError("kl_exact_bruteforce: eps must lie in (0, 1/2)");
  if (t == 0) return 0.0;
  const std::uint32_t outcomes = 1u << (m * t);
  const double p0 = std::ldexp(1.0, -static_cast<int>(m * t));
  // Outcome bit (arm * t + round) is the loss of `arm` in `round`.
  const std::uint32_t arm_mask = (1u << t) - 1u;
  const double one = 1.0 - 2.0 * eps;   // 2 * P(loss = 1) under the biased arm
  const double zero = 1.0 + 2.0 * eps;  // 2 * P(loss = 0)
  double kl = 0.0;
  for (std::uint32_t w = 0; w < outcomes; ++w) {
    double ratio = 0.0;  // P_mix(w) / P_0(w)
    for (std::size_t j = 0; j < m; ++j) {
      const int ones = std::popcount((w >> (j * t)) & arm_mask);
      ratio += std::pow(one, ones) * std::pow(zero, static_cast<int>(t) - ones);
    }
    ratio /= static_cast<double>(m);
    kl += p0 * ratio * std::log(ratio);
  }
  return kl;
}

/// c0 * ln(m + 1) / eps^2.
inline double t_star_threshold(std::size_t m, double eps, double c0) {
  if (!(eps > 0.0) || !(c0 > 0.0)) throw ParameterError("t_star_threshold: need eps > 0 and c0 > 0");
  return c0 * std::log(static_cast<double>(m) + 1.0) / (eps * eps);
}

/// c' * T^(2/3) * (sum_k max(ln|S_k|, |S_k| / t_k))^(1/3).
inline double weakly_lb_value(const std::vector<std::size_t>& set_sizes, const std::vector<double>& packings,
                              double horizon, double c_prime) {
  if (set_sizes.size() != packings.size()) throw ShapeError("weakly_lb_value: one packing number per set");
  double s = 0.0;
  for (std::size_t k = 0; k < set_sizes.size(); ++k) {
    if (set_sizes[k] == 0 || !(packings[k] > 0.0)) throw ParameterError("weakly_lb_value: positive inputs required");
    const double size = static_cast<double>(set_sizes[k]);
    s += std::max(std::log(size), size / packings[k]);
  }
  return c_prime * std::cbrt(horizon * horizon) * std::cbrt(s);
}

// -- continuous flow vs discrete step -----------------------------------------

inline constexpr double kOdeStep = 1e-5;

struct OdeCheck {
  double max_deviation = 0.0;
  std::vector<double> x_end;  // flow endpoint for the pulled group
  std::vector<double> y_end;  // flow endpoint for Y (un-projected)
};

/// Integrates, over one unit of time from the state's (Y, X), the flows
///   d/ds grad phi_k(X_k) = -l_hat_k
///   d/ds grad psi(Y)     = -L(s),  L(s)(k) = sum_j X_k(s)(j) l_hat_k(j)
/// in mirror coordinates. The X flow has constant velocity, so its Euler
/// path is exact and is evaluated pointwise; the Y flow is advanced with
/// classical RK4 driven by that path. Returns the largest entrywise gap to the
/// closed-form pre-projection iterates x_bar / y_bar.
inline OdeCheck ode_consistency_check(const TwoStageState& s, std::size_t k, std::span<const double> est,
                                      double step = kOdeStep) {
  if (k >= s.groups.groups()) throw IndexError("ode_consistency_check: group out of range");
  const std::vector<double>& x0 = s.xs[k].vec();
  if (est.size() != x0.size()) throw ShapeError("ode_consistency_check: estimate size mismatch");
  const double eta_k = s.etas[k];
  const double eta = s.eta;

  // The X flow moves grad phi_k at constant velocity -l_hat, so the mirror
  // point at time tau is grad phi_k(x0) - tau * l_hat; mapped back, that is
  // x0 * exp(-eta_k * tau * l_hat).
  auto x_at = [&](double tau, std::size_t j) { return x0[j] * std::exp(-eta_k * tau * est[j]); };
  auto group_loss = [&](double tau) {
    double l = 0.0;
    for (std::size_t j = 0; j < x0.size(); ++j) l += x_at(tau, j) * est[j];
    return l;
  };

  // grad psi(Y)(k) = -(1/eta) / sqrt(Y(k)); track the accumulated integral
  // of L so that -(1/eta) / sqrt(Y(s)(k)) = grad psi(Y)(k) - integral.
  const std::size_t steps = static_cast<std::size_t>(std::llround(1.0 / step));
  const double h = 1.0 / static_cast<double>(steps);
  double integral = 0.0;
  double l_left = group_loss(0.0);
  for (std::size_t i = 0; i < steps; ++i) {
    const double tau = static_cast<double>(i) * h;
    const double l_mid = group_loss(tau + 0.5 * h);
    const double l_right = group_loss(static_cast<double>(i + 1) * h);
    // RK4 with a time-only right-hand side reduces to Simpson weights.
    integral += h * (l_left + 4.0 * l_mid + l_right) / 6.0;
    l_left = l_right;
    if (!std::isfinite(integral)) throw NumericError("ode_consistency_check: integration diverged");
  }
  const double inv_sqrt = 1.0 / std::sqrt(s.y[k]) + eta * integral;

  OdeCheck out;
  out.x_end.resize(x0.size());
  for (std::size_t j = 0; j < x0.size(); ++j) out.x_end[j] = x_at(1.0, j);
  out.y_end = s.y.vec();
  out.y_end[k] = 1.0 / (inv_sqrt * inv_sqrt);

  const std::vector<double> xb = x_bar(s, k, est);
  const std::vector<double> yb = y_bar(s, k, est);
  for (std::size_t j = 0; j < xb.size(); ++j) {
    out.max_deviation = std::max(out.max_deviation, std::abs(out.x_end[j] - xb[j]));
  }
  for (std::size_t g = 0; g < yb.size(); ++g) {
    out.max_deviation = std::max(out.max_deviation, std::abs(out.y_end[g] - yb[g]));
  }
  return out;
}

}  // namespace mmab
