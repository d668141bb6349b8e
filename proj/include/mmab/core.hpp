#pragma once

// Arm/group indexing, probability vectors, loss vectors and sampling.
//
// Arms are addressed either by a flat index i in [0, N) or by a pair
// (k, j): group k in [0, K), position j in [0, m_k). Everything in the
// library uses 0-based indices; only file formats and CLI output use
// 1-based labels.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mmab {

// -- errors -------------------------------------------------------------------

struct IndexError : std::out_of_range {
  using std::out_of_range::out_of_range;
};
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct StateError : std::logic_error {
  using std::logic_error::logic_error;
};

inline constexpr double kSimplexTolerance = 1e-9;
inline constexpr double kProbabilityFloor = 1e-300;

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) built from the top 53 bits of one draw.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// SplitMix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Seed for trial `trial` of a run with base seed `base`:
/// splitmix64(splitmix64(base) ^ trial).
inline std::uint64_t trial_seed(std::uint64_t base, std::uint64_t trial) {
  return splitmix64(splitmix64(base) ^ trial);
}

/// The random streams owned by one trial: the learner's pulls, the
/// environment's losses, and auxiliary draws (output sampling, shuffles).
struct Streams {
  Rng learner;
  Rng environment;
  Rng aux;

  explicit Streams(std::uint64_t seed)
      : learner(splitmix64(seed ^ 0x1ull)), environment(splitmix64(seed ^ 0x2ull)), aux(splitmix64(seed ^ 0x3ull)) {}
};

// -- GroupVector --------------------------------------------------------------

struct ArmIndex {
  std::size_t group = 0;
  std::size_t within = 0;
  friend bool operator==(const ArmIndex&, const ArmIndex&) = default;
};

/// The group-size vector m = (m_1, ..., m_K) and its flat indexing scheme.
class GroupVector {
 public:
  GroupVector() = default;

  explicit GroupVector(std::vector<std::size_t> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.empty()) throw ParameterError("GroupVector: at least one group required");
    offsets_.reserve(sizes_.size() + 1);
    offsets_.push_back(0);
    for (std::size_t m : sizes_) {
      if (m == 0) throw ParameterError("GroupVector: group sizes must be >= 1");
      offsets_.push_back(offsets_.back() + m);
    }
  }

  GroupVector(std::initializer_list<std::size_t> sizes)
      : GroupVector(std::vector<std::size_t>(sizes)) {}

  std::size_t groups() const { return sizes_.size(); }
  std::size_t arms() const { return offsets_.empty() ? 0 : offsets_.back(); }
  std::size_t size(std::size_t k) const { return sizes_.at(k); }
  std::size_t offset(std::size_t k) const { return offsets_.at(k); }
  const std::vector<std::size_t>& sizes() const { return sizes_; }

  std::size_t flatten(std::size_t k, std::size_t j) const {
    if (k >= sizes_.size()) throw IndexError("flatten: group index out of range");
    if (j >= sizes_[k]) throw IndexError("flatten: within-group index out of range");
    return offsets_[k] + j;
  }

  ArmIndex unflatten(std::size_t i) const {
    if (i >= arms()) throw IndexError("unflatten: arm index out of range");
    // Groups are usually few; a linear scan keeps this branch-predictable.
    std::size_t k = 0;
    while (offsets_[k + 1] <= i) ++k;
    return {k, i - offsets_[k]};
  }

  /// Sum over groups of ln(m_k + 1).
  double log_size_sum() const {
    double s = 0.0;
    for (std::size_t m : sizes_) s += std::log(static_cast<double>(m) + 1.0);
    return s;
  }

  std::string to_string() const {
    std::string out = "(";
    for (std::size_t k = 0; k < sizes_.size(); ++k) {
      if (k) out += ',';
      out += std::to_string(sizes_[k]);
    }
    return out + ")";
  }

  friend bool operator==(const GroupVector& a, const GroupVector& b) {
    return a.sizes_ == b.sizes_;
  }

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
};

// -- SimplexDist --------------------------------------------------------------

/// A probability vector. Construction validates entries and renormalizes
/// when the total is within kSimplexTolerance of one.
class SimplexDist {
 public:
  SimplexDist() = default;

  explicit SimplexDist(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw ShapeError("SimplexDist: dimension must be positive");
    double total = 0.0;
    for (double p : probs_) {
      if (!(p >= 0.0) || !std::isfinite(p)) throw DomainError("SimplexDist: entries must be finite and >= 0");
      total += p;
    }
    if (std::abs(total - 1.0) > kSimplexTolerance) {
      throw DomainError("SimplexDist: entries sum to " + std::to_string(total));
    }
    if (total != 1.0) {
      for (double& p : probs_) p /= total;
    }
  }

  static SimplexDist uniform(std::size_t n) {
    if (n == 0) throw ShapeError("SimplexDist: dimension must be positive");
    return SimplexDist(std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }

  static SimplexDist point_mass(std::size_t n, std::size_t at) {
    if (at >= n) throw IndexError("point_mass: index out of range");
    std::vector<double> p(n, 0.0);
    p[at] = 1.0;
    return SimplexDist(std::move(p));
  }

  /// Normalizes an arbitrary nonnegative vector with positive total.
  static SimplexDist normalized(std::vector<double> weights) {
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("normalized: entries must be finite and >= 0");
      total += w;
    }
    if (!(total > 0.0)) throw DomainError("normalized: total mass is zero");
    for (double& w : weights) w /= total;
    return SimplexDist(std::move(weights));
  }

  std::size_t dim() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  double at(std::size_t i) const { return probs_.at(i); }
  std::span<const double> probs() const { return probs_; }
  const std::vector<double>& vec() const { return probs_; }

  friend bool operator==(const SimplexDist&, const SimplexDist&) = default;

 private:
  std::vector<double> probs_;
};

// -- LossVector ---------------------------------------------------------------

enum class LossRange { kUnitInterval, kUnbounded };

struct LossVector {
  std::vector<double> values;
  LossRange range = LossRange::kUnitInterval;

  LossVector() = default;
  explicit LossVector(std::vector<double> v, LossRange r = LossRange::kUnitInterval)
      : values(std::move(v)), range(r) {
    validate();
  }

  void validate() const {
    for (double x : values) {
      if (std::isnan(x)) throw DomainError("LossVector: NaN loss");
      if (range == LossRange::kUnitInterval && (x < 0.0 || x > 1.0)) {
        throw DomainError("LossVector: unit-interval loss out of [0,1]");
      }
    }
  }

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
};

// -- operations ---------------------------------------------------------------

/// Z(k, j) = Y(k) * X_k(j), laid out in flat arm order.
inline SimplexDist z_distribution(const GroupVector& groups, const SimplexDist& y,
                                  std::span<const SimplexDist> xs) {
  if (y.dim() != groups.groups() || xs.size() != groups.groups()) {
    throw ShapeError("z_distribution: outer dimension mismatch");
  }
  std::vector<double> z;
  z.reserve(groups.arms());
  for (std::size_t k = 0; k < groups.groups(); ++k) {
    if (xs[k].dim() != groups.size(k)) throw ShapeError("z_distribution: inner dimension mismatch");
    for (std::size_t j = 0; j < groups.size(k); ++j) z.push_back(y[k] * xs[k][j]);
  }
  return SimplexDist(std::move(z));
}

namespace detail {

// Inverse-CDF draw: first index whose running total exceeds u. An entry
// with zero mass never raises the running total, so it is never returned.
inline std::size_t inverse_cdf(std::span<const double> p, double u) {
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) {
      cumulative += p[i];
      last_positive = i;
      if (u < cumulative) return i;
    }
  }
  return last_positive;  // u landed in the round-off gap above the total
}

}  // namespace detail

inline std::size_t sample_index(const SimplexDist& dist, Rng& rng) {
  return detail::inverse_cdf(dist.probs(), uniform01(rng));
}

}  // namespace mmab
