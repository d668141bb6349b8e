#pragma once

// Loss generators: oblivious adversarial sequences, stochastic Bernoulli and
// Gaussian instances, the one-biased-arm hard families, the Gaussian to
// Bernoulli threshold map, singleton-group merging and the hard instances
// embedded into feedback graphs.

#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mmab/core.hpp"
#include "mmab/graphs.hpp"

namespace mmab {

struct ArmDistribution {
  enum class Kind { kBernoulli, kGaussian };
  Kind kind = Kind::kBernoulli;
  double mean = 0.5;
  double sigma = 0.0;  // Gaussian only

  static ArmDistribution bernoulli(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw ParameterError("bernoulli: mean must lie in [0,1]");
    return {Kind::kBernoulli, p, 0.0};
  }
  static ArmDistribution gaussian(double mu, double sigma) {
    if (!(sigma > 0.0)) throw ParameterError("gaussian: sigma must be positive");
    return {Kind::kGaussian, mu, sigma};
  }

  friend bool operator==(const ArmDistribution&, const ArmDistribution&) = default;
};

struct StochasticInstance {
  GroupVector groups;
  std::vector<ArmDistribution> arms;

  StochasticInstance() = default;
  StochasticInstance(GroupVector g, std::vector<ArmDistribution> a) : groups(std::move(g)), arms(std::move(a)) {
    if (arms.size() != groups.arms()) throw ShapeError("StochasticInstance: one distribution per arm required");
  }

  std::size_t size() const { return arms.size(); }

  bool bernoulli() const {
    for (const auto& a : arms)
      if (a.kind != ArmDistribution::Kind::kBernoulli) return false;
    return true;
  }

  std::vector<double> means() const {
    std::vector<double> m;
    m.reserve(arms.size());
    for (const auto& a : arms) m.push_back(a.mean);
    return m;
  }

  /// Lowest-index arm with the minimum mean.
  std::size_t best_arm() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < arms.size(); ++i)
      if (arms[i].mean < arms[best].mean) best = i;
    return best;
  }

  /// Arms whose mean is strictly less than the best mean plus eps.
  bool eps_optimal(std::size_t arm, double eps) const {
    return arms.at(arm).mean < arms[best_arm()].mean + eps;
  }

  /// Same arms under a different grouping with the same arm count.
  StochasticInstance regrouped(GroupVector g) const { return StochasticInstance(std::move(g), arms); }
};

// -- hard families ------------------------------------------------------------

inline StochasticInstance make_bernoulli(const GroupVector& groups, const std::vector<double>& means) {
  std::vector<ArmDistribution> arms;
  arms.reserve(means.size());
  for (double p : means) arms.push_back(ArmDistribution::bernoulli(p));
  return StochasticInstance(groups, std::move(arms));
}

/// Every arm a fair coin, grouped as given.
inline StochasticInstance make_block_h0(const GroupVector& groups) {
  return make_bernoulli(groups, std::vector<double>(groups.arms(), 0.5));
}

inline StochasticInstance make_h0(std::size_t m) {
  if (m == 0) throw ParameterError("make_h0: m must be >= 1");
  return make_block_h0(GroupVector({m}));
}

/// Fair coins except flat arm `biased`, which is Ber(1/2 - eps).
inline StochasticInstance make_block_hj(const GroupVector& groups, std::size_t biased, double eps) {
  if (!(eps > 0.0 && eps < 0.5)) throw ParameterError("make_hj: eps must lie in (0, 1/2)");
  if (biased >= groups.arms()) throw IndexError("make_hj: biased arm out of range");
  std::vector<double> means(groups.arms(), 0.5);
  means[biased] = 0.5 - eps;
  return make_bernoulli(groups, means);
}

/// H_j over a single group of m arms; j is 0-based here.
inline StochasticInstance make_hj(std::size_t m, std::size_t j, double eps) {
  if (m == 0) throw ParameterError("make_hj: m must be >= 1");
  if (j >= m) throw IndexError("make_hj: arm index out of range");
  return make_block_hj(GroupVector({m}), j, eps);
}

inline const double kSigmaLower = 1.0 / (2.0 * std::sqrt(2.0 * M_PI));
inline const double kSigmaUpper = 1.0 / std::sqrt(2.0 * M_PI);

/// Gaussian family over one group of m arms: all N(0, sigma^2) except, for
/// biased = j >= 1 (1-based), arm j ~ N(-eps, sigma^2). biased = 0 is N_0.
inline StochasticInstance make_gaussian_nj(std::size_t m, std::size_t biased, double eps, double sigma,
                                           bool strict = true) {
  if (m == 0) throw ParameterError("make_gaussian_nj: m must be >= 1");
  if (biased > m) throw IndexError("make_gaussian_nj: biased arm out of range");
  if (strict && !(sigma > kSigmaLower && sigma < kSigmaUpper)) {
    throw ParameterError("make_gaussian_nj: sigma outside (1/(2 sqrt(2 pi)), 1/sqrt(2 pi))");
  }
  std::vector<ArmDistribution> arms(m, ArmDistribution::gaussian(0.0, sigma));
  if (biased > 0) arms[biased - 1].mean = -eps;
  return StochasticInstance(GroupVector({m}), std::move(arms));
}

/// 0 below zero, 1 at or above zero.
inline double gaussian_to_bernoulli(double loss) { return loss < 0.0 ? 0.0 : 1.0; }

// -- sampling -----------------------------------------------------------------

namespace detail {

inline double draw(const ArmDistribution& a, Rng& rng) {
  if (a.kind == ArmDistribution::Kind::kBernoulli) return uniform01(rng) < a.mean ? 1.0 : 0.0;
  std::normal_distribution<double> normal(a.mean, a.sigma);
  return normal(rng);
}

}  // namespace detail

/// One independent draw per arm, in flat arm order.
inline LossVector sample_round(const StochasticInstance& inst, Rng& rng) {
  LossVector lv;
  lv.values.resize(inst.size());
  for (std::size_t i = 0; i < inst.size(); ++i) lv.values[i] = detail::draw(inst.arms[i], rng);
  lv.range = inst.bernoulli() ? LossRange::kUnitInterval : LossRange::kUnbounded;
  return lv;
}

/// As sample_round, writing into `out` to avoid reallocating per round.
inline void sample_round_into(const StochasticInstance& inst, Rng& rng, LossVector& out) {
  out.values.resize(inst.size());
  bool bounded = true;
  for (std::size_t i = 0; i < inst.size(); ++i) {
    out.values[i] = detail::draw(inst.arms[i], rng);
    bounded = bounded && inst.arms[i].kind == ArmDistribution::Kind::kBernoulli;
  }
  out.range = bounded ? LossRange::kUnitInterval : LossRange::kUnbounded;
}

// -- adversarial sequences ----------------------------------------------------

struct AdversarialSequence {
  std::size_t arms = 0;
  std::vector<double> losses;  // row-major, rounds x arms

  std::size_t rounds() const { return arms == 0 ? 0 : losses.size() / arms; }
};

inline LossVector adversarial_round(const AdversarialSequence& seq, std::size_t t) {
  if (t >= seq.rounds()) throw IndexError("adversarial_round: sequence exhausted at round " + std::to_string(t));
  const auto first = seq.losses.begin() + static_cast<std::ptrdiff_t>(t * seq.arms);
  LossVector lv;
  lv.values.assign(first, first + static_cast<std::ptrdiff_t>(seq.arms));
  lv.range = LossRange::kUnitInterval;
  return lv;
}

/// CSV with header `arm_1,...,arm_N`, then one row per round.
inline AdversarialSequence parse_loss_csv(std::istream& in, const std::string& source = "<csv>") {
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
      while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
      cells.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
  };

  std::string line;
  if (!std::getline(in, line)) throw ParameterError(source + ": missing header row");
  const auto header = split(line);
  if (header.empty()) throw ParameterError(source + ": empty header row");
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] != "arm_" + std::to_string(c + 1)) {
      throw ParameterError(source + ": header column " + std::to_string(c + 1) + " must be arm_" +
                           std::to_string(c + 1));
    }
  }
  AdversarialSequence seq;
  seq.arms = header.size();
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++row;
    const auto cells = split(line);
    if (cells.size() != seq.arms) {
      throw ParameterError(source + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                           " columns, expected " + std::to_string(seq.arms));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      auto where = [&] { return source + ": row " + std::to_string(row) + ", column " + std::to_string(c + 1); };
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cells[c], &used);
      } catch (const std::exception&) {
        throw ParameterError(where() + ": not a number");
      }
      if (used != cells[c].size()) throw ParameterError(where() + ": not a number");
      if (std::isnan(v)) throw ParameterError(where() + ": NaN loss");
      if (v < 0.0 || v > 1.0) throw ParameterError(where() + ": loss outside [0,1]");
      seq.losses.push_back(v);
    }
  }
  if (row == 0) throw ParameterError(source + ": no data rows");
  return seq;
}

inline AdversarialSequence load_loss_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open loss sequence " + path);
  return parse_loss_csv(in, path);
}

// -- group merging ------------------------------------------------------------

struct MergedGroups {
  GroupVector groups;
  std::vector<std::size_t> new_index;  // old flat arm -> new flat arm
};

/// Pairs singleton groups in order of appearance; each pair takes the
/// position of its first member. An odd leftover singleton is appended to
/// the first resulting group. A single-arm input is returned unchanged.
inline MergedGroups merge_singleton_groups(const GroupVector& groups) {
  // Resulting groups as lists of old flat indices.
  std::vector<std::vector<std::size_t>> out;
  std::optional<std::size_t> open_pair;  // position in `out` awaiting a partner
  for (std::size_t k = 0; k < groups.groups(); ++k) {
    const std::size_t base = groups.offset(k);
    if (groups.size(k) > 1) {
      std::vector<std::size_t> g;
      for (std::size_t j = 0; j < groups.size(k); ++j) g.push_back(base + j);
      out.push_back(std::move(g));
    } else if (open_pair) {
      out[*open_pair].push_back(base);
      open_pair.reset();
    } else {
      open_pair = out.size();
      out.push_back({base});
    }
  }
  if (open_pair && out.size() > 1) {
    const std::size_t leftover = out[*open_pair].front();
    out.erase(out.begin() + static_cast<std::ptrdiff_t>(*open_pair));
    out.front().push_back(leftover);
  }
  MergedGroups r;
  std::vector<std::size_t> sizes;
  r.new_index.assign(groups.arms(), 0);
  std::size_t next = 0;
  for (const auto& g : out) {
    sizes.push_back(g.size());
    for (std::size_t old : g) r.new_index[old] = next++;
  }
  r.groups = GroupVector(std::move(sizes));
  return r;
}

/// Reorders an instance's arms by a merge remapping onto the merged groups.
inline StochasticInstance apply_merge(const StochasticInstance& inst, const MergedGroups& merge) {
  std::vector<ArmDistribution> arms(inst.size());
  for (std::size_t old = 0; old < inst.size(); ++old) arms[merge.new_index.at(old)] = inst.arms[old];
  return StochasticInstance(merge.groups, std::move(arms));
}

// -- graph hard instances -----------------------------------------------------

struct BiasedArm {
  std::size_t set = 0;     // which special set
  std::size_t member = 0;  // position inside that set
};

/// Vertices in the special sets are fair coins (one optionally biased to
/// Ber(1/2 - eps)); every other vertex always has loss 1.
inline StochasticInstance make_graph_hard_instance(const FeedbackGraph& g,
                                                   const std::vector<std::vector<std::size_t>>& special,
                                                   double eps, std::optional<BiasedArm> biased = std::nullopt) {
  const std::size_t n = g.vertices();
  std::vector<double> means(n, 1.0);
  std::vector<bool> used(n, false);
  for (const auto& s : special) {
    for (std::size_t v : s) {
      if (v >= n) throw IndexError("make_graph_hard_instance: vertex out of range");
      if (used[v]) throw ParameterError("make_graph_hard_instance: special sets overlap");
      used[v] = true;
      means[v] = 0.5;
    }
  }
  if (biased) {
    if (!(eps > 0.0 && eps < 0.5)) throw ParameterError("make_graph_hard_instance: eps must lie in (0, 1/2)");
    if (biased->set >= special.size() || biased->member >= special[biased->set].size()) {
      throw IndexError("make_graph_hard_instance: biased arm out of range");
    }
    means[special[biased->set][biased->member]] = 0.5 - eps;
  }
  return make_bernoulli(GroupVector({n}), means);
}

}  // namespace mmab
