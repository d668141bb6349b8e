#pragma once

// Regularizers for the two stages: the scaled negative entropy used inside
// each group and the Tsallis-1/2 entropy used across groups, with their
// Bregman divergences and simplex projections.
//
// Both potentials carry their learning rate:
//   phi(x) = (1/eta_k) * sum x(i) log x(i)
//   psi(y) = -(2/eta)  * sum sqrt(y(i))

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "mmab/core.hpp"

namespace mmab {

namespace detail {

inline void require_positive(std::span<const double> x, const char* what) {
  for (double v : x) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError(std::string(what) + ": entries must be positive");
  }
}

inline void require_same_dim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("bregman: dimension mismatch");
}

}  // namespace detail

struct NegEntropyPotential {
  double eta = 1.0;

  explicit NegEntropyPotential(double rate) : eta(rate) {
    if (!(rate > 0.0)) throw ParameterError("NegEntropyPotential: eta must be positive");
  }

  double value(std::span<const double> x) const {
    detail::require_positive(x, "negent_value");
    double s = 0.0;
    for (double v : x) s += v * std::log(v);
    return s / eta;
  }

  std::vector<double> grad(std::span<const double> x) const {
    detail::require_positive(x, "negent_grad");
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = (1.0 + std::log(x[i])) / eta;
    return g;
  }
};

struct TsallisPotential {
  double eta = 1.0;

  explicit TsallisPotential(double rate) : eta(rate) {
    if (!(rate > 0.0)) throw ParameterError("TsallisPotential: eta must be positive");
  }

  double value(std::span<const double> y) const {
    detail::require_positive(y, "tsallis_value");
    double s = 0.0;
    for (double v : y) s += std::sqrt(v);
    return -2.0 * s / eta;
  }

  std::vector<double> grad(std::span<const double> y) const {
    detail::require_positive(y, "tsallis_grad");
    std::vector<double> g(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) g[i] = -1.0 / (eta * std::sqrt(y[i]));
    return g;
  }
};

template <class P>
concept Potential = requires(const P& p, std::span<const double> x) {
  { p.value(x) } -> std::convertible_to<double>;
  { p.grad(x) } -> std::convertible_to<std::vector<double>>;
};

/// B_F(x, y) = F(x) - F(y) - <x - y, grad F(y)>.
template <Potential P>
double bregman(const P& potential, std::span<const double> x, std::span<const double> y) {
  detail::require_same_dim(x, y);
  const std::vector<double> g = potential.grad(y);
  double inner = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) inner += (x[i] - y[i]) * g[i];
  return potential.value(x) - potential.value(y) - inner;
}

/// Entropic projection onto the simplex is plain normalization.
inline SimplexDist project(const NegEntropyPotential&, std::span<const double> xbar) {
  detail::require_positive(xbar, "project_negent");
  return SimplexDist::normalized(std::vector<double>(xbar.begin(), xbar.end()));
}

struct TsallisProjection {
  SimplexDist point;
  /// The shift c with y(k) = (a_k - c)^-2, a_k = ybar(k)^-1/2. The
  /// Lagrange multiplier of the stationarity condition is c / eta.
  double shift = 0.0;
  int iterations = 0;
};

inline constexpr double kTsallisSumTolerance = 1e-12;
inline constexpr int kTsallisMaxIterations = 200;

namespace detail {

// Solves sum_k (a_k - c)^-2 = 1 for c < min a_k. The map is strictly
// increasing and convex in c, so Newton started right of the root moves
// monotonically left onto it; bisection takes over if a step ever leaves
// the bracket [min a - sqrt(K), min a - 1].
inline TsallisProjection tsallis_from_inv_sqrt(std::span<const double> a) {
  const std::size_t n = a.size();
  if (n == 0) throw ShapeError("project_tsallis: empty input");
  const double a_min = *std::min_element(a.begin(), a.end());

  // Only the differences a_k - min a matter; shifting first keeps the solve
  // accurate when a is huge (tiny ybar).
  std::vector<double> b(n);
  for (std::size_t k = 0; k < n; ++k) b[k] = a[k] - a_min;

  auto excess = [&](double d, double* slope) {
    double f = 0.0, df = 0.0;
    for (double bk : b) {
      const double r = 1.0 / (bk - d);
      const double r2 = r * r;
      f += r2;
      df += 2.0 * r2 * r;
    }
    if (slope) *slope = df;
    return f - 1.0;
  };

  double lo = -std::sqrt(static_cast<double>(n));
  double hi = -1.0;
  double d = hi;
  int it = 0;
  for (; it < kTsallisMaxIterations; ++it) {
    double slope = 0.0;
    const double f = excess(d, &slope);
    if (std::abs(f) <= kTsallisSumTolerance) break;
    if (f > 0.0) hi = d; else lo = d;
    double next = d - f / slope;
    if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
    if (next == d) break;
    d = next;
  }
  if (it == kTsallisMaxIterations) throw NumericError("project_tsallis: root finder did not converge");

  std::vector<double> y(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double r = 1.0 / (b[k] - d);
    y[k] = std::max(r * r, kProbabilityFloor);
  }
  double total = 0.0;
  for (double v : y) total += v;
  if (std::abs(total - 1.0) > kSimplexTolerance) {
    throw NumericError("project_tsallis: projected point left the simplex");
  }
  const double c = a_min + d;
  return {SimplexDist(std::move(y)), c, it};
}

}  // namespace detail

/// Bregman projection of ybar onto the simplex under psi. The
/// minimizer does not depend on eta; only the multiplier does.
inline TsallisProjection project_tsallis(const TsallisPotential&, std::span<const double> ybar) {
  detail::require_positive(ybar, "project_tsallis");
  std::vector<double> a(ybar.size());
  for (std::size_t k = 0; k < a.size(); ++k) a[k] = 1.0 / std::sqrt(ybar[k]);
  return detail::tsallis_from_inv_sqrt(a);
}

inline SimplexDist project(const TsallisPotential& p, std::span<const double> ybar) {
  return project_tsallis(p, ybar).point;
}

}  // namespace mmab
