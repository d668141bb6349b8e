#pragma once

// Directed feedback graphs: pulling v reveals the losses of N_out(v).
// Observability classes, clique covers, t-packing independent sets, and the
// adapter that plays a graph game through the grouped-feedback learner by
// keeping only the observations inside each clique of a cover.

#include <algorithm>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mmab/core.hpp"
#include "mmab/twostage.hpp"

namespace mmab {

class FeedbackGraph {
 public:
  FeedbackGraph() = default;
  explicit FeedbackGraph(std::size_t n) : out_(n), in_(n), loop_(n, false) {}

  std::size_t vertices() const { return out_.size(); }

  void add_edge(std::size_t from, std::size_t to) {
    if (from >= vertices() || to >= vertices()) throw IndexError("add_edge: vertex out of range");
    auto insert_sorted = [](std::vector<std::size_t>& v, std::size_t x) {
      auto it = std::lower_bound(v.begin(), v.end(), x);
      if (it == v.end() || *it != x) v.insert(it, x);
    };
    insert_sorted(out_[from], to);
    insert_sorted(in_[to], from);
    if (from == to) loop_[from] = true;
  }

  void add_undirected(std::size_t u, std::size_t v) {
    add_edge(u, v);
    add_edge(v, u);
  }

  bool has_edge(std::size_t from, std::size_t to) const {
    const auto& v = out_.at(from);
    return std::binary_search(v.begin(), v.end(), to);
  }
  bool has_self_loop(std::size_t v) const { return loop_.at(v); }
  const std::vector<std::size_t>& out_neighbors(std::size_t v) const { return out_.at(v); }
  const std::vector<std::size_t>& in_neighbors(std::size_t v) const { return in_.at(v); }

  bool all_self_loops() const {
    return std::all_of(loop_.begin(), loop_.end(), [](bool b) { return b; });
  }

  /// Complete graph with self-loops: full information.
  static FeedbackGraph complete(std::size_t n) {
    FeedbackGraph g(n);
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t v = 0; v < n; ++v) g.add_edge(u, v);
    return g;
  }

  /// Disjoint union of self-looped cliques with the given sizes, laid out
  /// consecutively.
  static FeedbackGraph disjoint_cliques(const std::vector<std::size_t>& sizes) {
    std::size_t n = 0;
    for (std::size_t s : sizes) n += s;
    FeedbackGraph g(n);
    std::size_t base = 0;
    for (std::size_t s : sizes) {
      for (std::size_t u = base; u < base + s; ++u)
        for (std::size_t v = base; v < base + s; ++v) g.add_edge(u, v);
      base += s;
    }
    return g;
  }

  friend bool operator==(const FeedbackGraph&, const FeedbackGraph&) = default;

 private:
  std::vector<std::vector<std::size_t>> out_;
  std::vector<std::vector<std::size_t>> in_;
  std::vector<bool> loop_;
};

// -- file format ----------------------------------------------------------------
//
// One line per vertex, `v: u1 u2 ...`, listing directed out-edges with
// 1-based ids; a self-loop is `v` in its own list. Blank lines and lines
// starting with '#' are ignored. Every vertex 1..N must appear exactly once.

inline FeedbackGraph parse_graph(std::istream& in, const std::string& source = "<graph>") {
  std::vector<std::pair<std::size_t, std::vector<std::size_t>>> rows;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& msg) {
    throw ParameterError(source + ":" + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) fail("expected `v: u1 u2 ...`");
    std::istringstream head(line.substr(0, colon));
    long long v = 0;
    if (!(head >> v) || v < 1) fail("bad vertex id");
    std::string rest;
    if (head >> rest) fail("junk before ':'");
    std::istringstream tail(line.substr(colon + 1));
    std::vector<std::size_t> outs;
    std::string tok;
    while (tail >> tok) {
      std::size_t used = 0;
      long long u = 0;
      try {
        u = std::stoll(tok, &used);
      } catch (const std::exception&) {
        fail("bad neighbor id '" + tok + "'");
      }
      if (used != tok.size() || u < 1) fail("bad neighbor id '" + tok + "'");
      outs.push_back(static_cast<std::size_t>(u - 1));
    }
    rows.emplace_back(static_cast<std::size_t>(v - 1), std::move(outs));
  }
  const std::size_t n = rows.size();
  if (n == 0) throw ParameterError(source + ": empty graph");
  std::vector<bool> seen(n, false);
  FeedbackGraph g(n);
  for (const auto& [v, outs] : rows) {
    if (v >= n) throw ParameterError(source + ": vertex " + std::to_string(v + 1) + " exceeds vertex count");
    if (seen[v]) throw ParameterError(source + ": vertex " + std::to_string(v + 1) + " listed twice");
    seen[v] = true;
    for (std::size_t u : outs) {
      if (u >= n) throw ParameterError(source + ": edge target " + std::to_string(u + 1) + " out of range");
      g.add_edge(v, u);
    }
  }
  return g;
}

inline FeedbackGraph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open graph file " + path);
  return parse_graph(in, path);
}

inline std::string format_graph(const FeedbackGraph& g) {
  std::string out;
  for (std::size_t v = 0; v < g.vertices(); ++v) {
    out += std::to_string(v + 1) + ":";
    for (std::size_t u : g.out_neighbors(v)) out += " " + std::to_string(u + 1);
    out += "\n";
  }
  return out;
}

// -- observability ------------------------------------------------------------

enum class Observability { kNonObservable, kWeakly, kStrongly };

inline const char* to_string(Observability o) {
  switch (o) {
    case Observability::kNonObservable: return "non-observable";
    case Observability::kWeakly: return "weakly";
    case Observability::kStrongly: return "strongly";
  }
  return "?";
}

struct Classification {
  std::vector<Observability> vertex;
  Observability graph = Observability::kStrongly;
};

inline Classification classify(const FeedbackGraph& g) {
  const std::size_t n = g.vertices();
  Classification c;
  c.vertex.resize(n);
  bool any_weak = false, any_unobservable = false;
  for (std::size_t v = 0; v < n; ++v) {
    const auto& in = g.in_neighbors(v);
    if (in.empty()) {
      c.vertex[v] = Observability::kNonObservable;
      any_unobservable = true;
      continue;
    }
    // N_in(v) == V \ {v}: every other vertex points at v, and v does not.
    const bool all_others = !g.has_self_loop(v) && in.size() == n - 1;
    if (g.has_self_loop(v) || all_others) {
      c.vertex[v] = Observability::kStrongly;
    } else {
      c.vertex[v] = Observability::kWeakly;
      any_weak = true;
    }
  }
  c.graph = any_unobservable ? Observability::kNonObservable
            : any_weak       ? Observability::kWeakly
                             : Observability::kStrongly;
  return c;
}

// -- clique covers --------------------------------------------------------------

struct CliqueCover {
  std::vector<std::vector<std::size_t>> sets;

  GroupVector groups() const {
    std::vector<std::size_t> sizes;
    for (const auto& s : sets) sizes.push_back(s.size());
    return GroupVector(std::move(sizes));
  }

  friend bool operator==(const CliqueCover&, const CliqueCover&) = default;
};

/// Returns an empty string when `cover` is a valid clique cover of `g`,
/// otherwise a description of the first violation. Cliques need edges in
/// both directions between distinct members.
inline std::string clique_cover_violation(const FeedbackGraph& g, const CliqueCover& cover,
                                          bool require_self_loops = true) {
  std::vector<int> owner(g.vertices(), -1);
  for (std::size_t k = 0; k < cover.sets.size(); ++k) {
    if (cover.sets[k].empty()) return "set " + std::to_string(k) + " is empty";
    for (std::size_t v : cover.sets[k]) {
      if (v >= g.vertices()) return "vertex " + std::to_string(v) + " out of range";
      if (owner[v] != -1) return "vertex " + std::to_string(v) + " appears in two sets";
      owner[v] = static_cast<int>(k);
    }
  }
  for (std::size_t v = 0; v < g.vertices(); ++v) {
    if (owner[v] == -1) return "vertex " + std::to_string(v) + " is not covered";
  }
  for (const auto& s : cover.sets) {
    for (std::size_t u : s) {
      if (require_self_loops && !g.has_self_loop(u)) return "vertex " + std::to_string(u) + " lacks a self-loop";
      for (std::size_t v : s) {
        if (u != v && !g.has_edge(u, v)) {
          return "missing edge " + std::to_string(u) + "->" + std::to_string(v);
        }
      }
    }
  }
  return {};
}

inline bool is_clique_cover(const FeedbackGraph& g, const CliqueCover& cover, bool require_self_loops = true) {
  return clique_cover_violation(g, cover, require_self_loops).empty();
}

/// Greedy cover: seed the lowest uncovered vertex, then scan upward adding
/// every uncovered vertex joined in both directions to all current members.
inline CliqueCover greedy_clique_cover(const FeedbackGraph& g, bool strict = true) {
  if (strict) {
    if (!g.all_self_loops()) throw ParameterError("greedy_clique_cover: strict mode requires a self-loop on every vertex");
  }
  const std::size_t n = g.vertices();
  std::vector<bool> covered(n, false);
  CliqueCover cover;
  for (std::size_t seed = 0; seed < n; ++seed) {
    if (covered[seed]) continue;
    std::vector<std::size_t> clique{seed};
    covered[seed] = true;
    for (std::size_t v = seed + 1; v < n; ++v) {
      if (covered[v]) continue;
      const bool joins = std::all_of(clique.begin(), clique.end(), [&](std::size_t u) {
        return g.has_edge(u, v) && g.has_edge(v, u);
      });
      if (joins) {
        clique.push_back(v);
        covered[v] = true;
      }
    }
    cover.sets.push_back(std::move(clique));
  }
  return cover;
}

/// Minimum clique cover by exhaustive search over vertex assignments, for
/// small graphs only (N <= 12).
inline CliqueCover exhaustive_min_clique_cover(const FeedbackGraph& g) {
  const std::size_t n = g.vertices();
  if (n > 12) throw ParameterError("exhaustive_min_clique_cover: at most 12 vertices");
  auto mutual = [&](std::size_t u, std::size_t v) { return g.has_edge(u, v) && g.has_edge(v, u); };
  CliqueCover best;
  std::size_t best_k = n + 1;
  std::vector<std::vector<std::size_t>> current;
  // Assign vertices in order to an existing compatible clique or a new one.
  auto rec = [&](auto&& self, std::size_t v) -> void {
    if (current.size() >= best_k) return;
    if (v == n) {
      best_k = current.size();
      best.sets = current;
      return;
    }
    // Indexed on purpose: the recursion grows `current`.
    for (std::size_t k = 0; k < current.size(); ++k) {
      if (std::all_of(current[k].begin(), current[k].end(), [&](std::size_t u) { return mutual(u, v); })) {
        current[k].push_back(v);
        self(self, v + 1);
        current[k].pop_back();
      }
    }
    current.push_back({v});
    self(self, v + 1);
    current.pop_back();
  };
  rec(rec, 0);
  return best;
}

// -- t-packing ------------------------------------------------------------------

/// S is independent (no edge between distinct members) and every vertex has
/// at most t out-neighbors in S.
inline bool is_t_packing_independent(const FeedbackGraph& g, const std::vector<std::size_t>& s, std::size_t t) {
  std::vector<bool> in_s(g.vertices(), false);
  for (std::size_t v : s) {
    if (v >= g.vertices()) throw IndexError("is_t_packing_independent: vertex out of range");
    in_s[v] = true;
  }
  for (std::size_t u : s)
    for (std::size_t v : s)
      if (u != v && g.has_edge(u, v)) return false;
  for (std::size_t v = 0; v < g.vertices(); ++v) {
    std::size_t hits = 0;
    for (std::size_t u : g.out_neighbors(v)) hits += in_s[u] ? 1 : 0;
    if (hits > t) return false;
  }
  return true;
}

// -- adapter ----------------------------------------------------------------------

/// Maps a graph game onto grouped feedback: clique k of the cover becomes
/// group k, and its members are the group's arms in the order listed.
class GraphAdapter {
 public:
  GraphAdapter(const FeedbackGraph& g, CliqueCover cover) : cover_(std::move(cover)) {
    if (auto why = clique_cover_violation(g, cover_); !why.empty()) {
      throw ParameterError("GraphAdapter: invalid clique cover: " + why);
    }
    groups_ = cover_.groups();
    arm_of_vertex_.assign(g.vertices(), 0);
    for (const auto& s : cover_.sets) {
      for (std::size_t v : s) {
        arm_of_vertex_[v] = vertex_of_arm_.size();
        vertex_of_arm_.push_back(v);
      }
    }
  }

  const GroupVector& groups() const { return groups_; }
  const CliqueCover& cover() const { return cover_; }
  std::size_t vertex_of_arm(std::size_t arm) const { return vertex_of_arm_.at(arm); }
  std::size_t arm_of_vertex(std::size_t v) const { return arm_of_vertex_.at(v); }

  /// Reorders a per-vertex loss vector into flat arm order.
  LossVector to_arm_losses(const LossVector& by_vertex) const {
    if (by_vertex.size() != vertex_of_arm_.size()) throw ShapeError("GraphAdapter: loss vector size mismatch");
    std::vector<double> out(by_vertex.size());
    for (std::size_t a = 0; a < out.size(); ++a) out[a] = by_vertex[vertex_of_arm_[a]];
    LossVector lv;
    lv.values = std::move(out);
    lv.range = by_vertex.range;
    return lv;
  }

  /// Vertices whose losses the learner sees after pulling v: v's clique only.
  std::vector<std::size_t> revealed(std::size_t v) const {
    const ArmIndex a = groups_.unflatten(arm_of_vertex_.at(v));
    return cover_.sets[a.group];
  }

 private:
  CliqueCover cover_;
  GroupVector groups_;
  std::vector<std::size_t> vertex_of_arm_;
  std::vector<std::size_t> arm_of_vertex_;
};

struct GraphRound {
  RoundRecord record;  // in the adapter's flat arm coordinates
  std::size_t vertex = 0;
};

/// One round of the graph game. The per-vertex loss vector is everything
/// the graph would reveal; the learner only reads the pulled clique.
inline GraphRound play_graph_round(TwoStageState& s, const GraphAdapter& adapter, const LossVector& by_vertex,
                                   Rng& rng) {
  if (!(s.groups == adapter.groups())) throw ShapeError("play_graph_round: learner groups differ from the cover");
  GraphRound r;
  r.record = play_round(s, adapter.to_arm_losses(by_vertex), rng);
  r.vertex = adapter.vertex_of_arm(r.record.arm);
  return r;
}

}  // namespace mmab
