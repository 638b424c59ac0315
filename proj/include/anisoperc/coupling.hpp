#pragma once

// Dynamical coupling between anisotropic percolation on the multigraph
// Z^d x Z_U (every vertical edge split into |U| copies indexed by U) and
// homogeneous percolation on Z^d.
//
// The exploration grows S (vertices of Z^{d+1} in the cluster of the origin)
// one Z^d-edge at a time. At step n the earliest unexplored edge f_n of the
// outer boundary of the projection S^pi is examined at the height t of its
// inner endpoint u:
//   (a) [f_n, t] open                                   -> eta = 1, new vertex at t
//   (b) [f_n, t] closed, <(u,t),(u,t+1)>_v and [f_n, t+1] open (a v-hook)
//                                                       -> eta = 1, new vertex at t+1
//   otherwise                                           -> eta = 0
// with v the direction of f_n. Every probed omega-edge is fresh, so the eta
// values are iid Bernoulli(r), r = p + qbar p (1 - p).
//
// omega is sampled lazily on first probe; heights live in a window [0, H)
// (non-layered) or in Z mod (l + 1) (layered).

#include <algorithm>
#include <climits>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>
#include <cstdint>
#include <functional>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "anisoperc/clusters.hpp"
#include "anisoperc/error.hpp"
#include "anisoperc/lattice.hpp"
#include "anisoperc/parallel.hpp"
#include "anisoperc/rng.hpp"
#include "anisoperc/sampling.hpp"
#include "anisoperc/stats.hpp"

namespace anisoperc {

enum class Outcome : std::uint8_t { died, reached_boundary, budget_exhausted, window_exhausted };
enum class Condition : std::uint8_t { none, a, b };

inline std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::died: return "died";
    case Outcome::reached_boundary: return "reached_boundary";
    case Outcome::budget_exhausted: return "budget_exhausted";
    case Outcome::window_exhausted: return "window_exhausted";
  }
  return "?";
}

inline std::string to_string(Condition c) {
  switch (c) {
    case Condition::none: return "none";
    case Condition::a: return "a";
    case Condition::b: return "b";
  }
  return "?";
}

// Identity of an omega-edge of the multigraph.
struct ProbeKey {
  enum Kind : std::uint8_t { horizontal, vertical };
  Kind kind = horizontal;
  std::uint32_t id = 0;  // horizontal: rank of the Z^d-edge; vertical: Z^d vertex
  std::int32_t t = 0;    // layer; for vertical edges the canonical lower endpoint
  std::int16_t v = -1;   // vertical only: index into U

  bool operator==(const ProbeKey&) const = default;
  auto operator<=>(const ProbeKey&) const = default;
};

struct ProbeKeyHash {
  std::size_t operator()(const ProbeKey& k) const {
    std::uint64_t h = splitmix64((static_cast<std::uint64_t>(k.id) << 32) | static_cast<std::uint32_t>(k.t));
    return static_cast<std::size_t>(splitmix64(h ^ (static_cast<std::uint64_t>(k.kind) << 17) ^
                                               static_cast<std::uint16_t>(k.v)));
  }
};

struct Probe {
  ProbeKey key;
  bool open = false;
  std::size_t step = 0;
};

struct HookProbe {
  std::uint32_t u = 0;
  std::int32_t t = 0;
  int v = 0;
  bool vertical_open = false;
  bool horizontal_open = false;
  bool present() const { return vertical_open && horizontal_open; }
};

struct StepRecord {
  std::size_t step = 0;
  std::uint32_t edge = 0;   // rank of f_n
  std::uint32_t from = 0;   // endpoint in S^pi_{n-1}
  std::uint32_t to = 0;     // endpoint outside S^pi_{n-1}
  int v = 0;                // index into U of to - from
  std::int32_t level = 0;   // height of `from`
  Condition condition = Condition::none;
  bool eta = false;
  std::int32_t added_t = 0;  // height of the new vertex when eta = 1
};

struct CouplingState {
  std::size_t step = 0;
  std::uint32_t origin = 0;                              // Z^d index of the origin
  std::vector<std::uint32_t> A;                          // eta = 1 edges, in order
  std::vector<std::uint32_t> B;                          // eta = 0 edges, in order
  std::vector<std::pair<std::uint32_t, std::int32_t>> S; // (u, t), S[0] = (origin, 0)
  std::vector<std::int32_t> height;                      // tau^{-1}: u -> t, INT_MIN off S^pi
  std::vector<Probe> probes;                             // omega-edges in probe order
  std::vector<StepRecord> trace;
  Outcome outcome = Outcome::died;
  std::size_t stale_probes = 0;       // probes of an already-probed omega-edge
  std::size_t invariant_failures = 0; // failures of the in-loop checks
  std::int32_t max_height = 0;

  bool in_projection(std::uint32_t u) const { return height[u] != INT_MIN; }
  std::size_t projection_size() const { return S.size(); }
};

struct CouplingOptions {
  std::size_t step_budget = 0;  // 0: number of Z^d-edges in the box (never binds)
  std::int32_t window = 0;      // height window H for non-layered runs; 0: budget + 1
  std::size_t check_every = 0;  // in-loop invariant checks every k steps; 0 disables
  bool record_trace = true;
};

// Random omega for run `run` under `seed`: horizontal edges open with p,
// vertical copies with qbar.
class LazyOmega {
public:
  LazyOmega(std::uint64_t seed, std::uint32_t run, double p, double qbar)
      : seed_(seed), run_(run), tp_(bernoulli_threshold(p)), tq_(bernoulli_threshold(qbar)) {}

  bool operator()(const ProbeKey& k) const {
    if (k.kind == ProbeKey::horizontal) {
      const Counter c = philox4x32(
          {k.id, static_cast<std::uint32_t>(k.t), run_, tag(Domain::coupling_horizontal)}, seed_);
      return bernoulli(c[0], tp_);
    }
    const Counter c = philox4x32({k.id, static_cast<std::uint32_t>(k.t), run_,
                                  tag(Domain::coupling_vertical, static_cast<std::uint16_t>(k.v))},
                                 seed_);
    return bernoulli(c[0], tq_);
  }

private:
  std::uint64_t seed_;
  std::uint32_t run_;
  std::uint64_t tp_;
  std::uint64_t tq_;
};

using OmegaSource = std::function<bool(const ProbeKey&)>;

struct TraceCheck {
  std::string name;
  bool passed = true;
  std::string detail;  // first counterexample
};

struct TraceReport {
  std::vector<TraceCheck> checks;
  bool ok() const {
    return std::all_of(checks.begin(), checks.end(), [](const TraceCheck& c) { return c.passed; });
  }
  const TraceCheck* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
};

class Coupling {
public:
  Coupling(const LatticeSpec& spec, double p, double q, CouplingOptions options = {})
      : spec_(checked(spec)),
        box_(spec_.d, spec_.side_d, spec_.boundary_d, neighborhood(spec_)),
        ordering_(box_),
        p_(p),
        q_(q),
        qbar_(effective_qbar(q, static_cast<int>(box_.directions().size()))),
        options_(options) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("coupling: p must lie in [0,1]");
    if (options_.step_budget == 0) options_.step_budget = ordering_.size();
    if (options_.window == 0) {
      options_.window = static_cast<std::int32_t>(std::min<std::size_t>(options_.step_budget + 1, INT32_MAX));
    }
    // Neighbours of each direction, expressed via the edge ordering.
    const auto& dirs = box_.directions();
    neighbor_edges_.resize(box_.size());
    for (std::uint32_t u = 0; u < box_.size(); ++u) {
      for (std::size_t k = 0; k < dirs.size(); ++k) {
        const std::int64_t w = box_.translate(u, dirs[k]);
        if (w < 0) continue;
        neighbor_edges_[u].push_back(
            {static_cast<std::uint32_t>(ordering_.rank_between(u, dirs[k])), static_cast<std::uint32_t>(w),
             static_cast<int>(k)});
      }
    }
  }

  const LatticeSpec& spec() const { return spec_; }
  const ZdBox& box() const { return box_; }
  const EdgeOrdering& ordering() const { return ordering_; }
  const CouplingOptions& options() const { return options_; }
  double p() const { return p_; }
  double q() const { return q_; }
  double qbar() const { return qbar_; }
  double r() const { return effective_r(p_, qbar_); }
  bool layered() const { return spec_.variant == Variant::layered; }
  std::int32_t modulus() const { return spec_.layers + 1; }

  // Height reached by a hook from level t; nullopt when it leaves the window.
  std::optional<std::int32_t> up(std::int32_t t) const {
    if (layered()) return (t + 1) % modulus();
    if (t + 1 >= options_.window) return std::nullopt;
    return t + 1;
  }

  // Canonical key of the vertical copy v between (u,t) and (u,up(t)).
  ProbeKey vertical_key(std::uint32_t u, std::int32_t t, int v) const {
    const std::int32_t lower = (layered() && modulus() == 2) ? 0 : t;
    return ProbeKey{ProbeKey::vertical, u, lower, static_cast<std::int16_t>(v)};
  }

  ProbeKey horizontal_key(std::uint32_t rank, std::int32_t t) const {
    return ProbeKey{ProbeKey::horizontal, rank, t, -1};
  }

  // Endpoints in Z^{d+1} (as (u,t) pairs) of an omega-edge.
  std::pair<std::pair<std::uint32_t, std::int32_t>, std::pair<std::uint32_t, std::int32_t>> endpoints(
      const ProbeKey& k) const {
    if (k.kind == ProbeKey::horizontal) {
      auto [a, b] = ordering_.endpoints(k.id);
      return {{a, k.t}, {b, k.t}};
    }
    const std::int32_t top = layered() ? (k.t + 1) % modulus() : k.t + 1;
    return {{k.id, k.t}, {k.id, top}};
  }

  LazyOmega random_omega(std::uint64_t seed, std::uint32_t run) const { return LazyOmega(seed, run, p_, qbar_); }

  CouplingState explore(std::uint64_t seed, std::uint32_t run = 0) const {
    return explore_with(random_omega(seed, run));
  }

  template <typename Omega>
  CouplingState explore_with(const Omega& omega) const {
    CouplingState st;
    Session<Omega> session{*this, st, omega, {}};
    session.run();
    return st;
  }

  // Inspect a v-hook at (u,t) and record both probes.
  template <typename Omega>
  HookProbe vhook_present(CouplingState& st, const Omega& omega, std::uint32_t u, std::int32_t t, int v) const {
    Session<Omega> session{*this, st, omega, {}};
    return session.hook(u, t, v).value_or(HookProbe{});
  }

  TraceReport verify_trace(const CouplingState& st) const;

private:
  struct NeighborEdge {
    std::uint32_t rank;
    std::uint32_t other;
    int v;
  };

  static const LatticeSpec& checked(const LatticeSpec& spec) {
    spec.validate();
    if (spec.s != 1) throw UnsupportedVariant("coupling requires s = 1");
    if (spec.boundary_d != Boundary::free) throw UnsupportedVariant("coupling requires a free Z^d boundary");
    if (spec.side_d < 3) throw SpecError("coupling requires side_d >= 3");
    return spec;
  }

  template <typename Omega>
  struct Session {
    const Coupling& c;
    CouplingState& st;
    const Omega& omega;
    std::unordered_set<ProbeKey, ProbeKeyHash> seen;

    bool probe(const ProbeKey& k) {
      const bool open = omega(k);
      if (!seen.insert(k).second) ++st.stale_probes;
      st.probes.push_back(Probe{k, open, st.step});
      return open;
    }

    std::optional<HookProbe> hook(std::uint32_t u, std::int32_t t, int v) {
      const auto top = c.up(t);
      if (!top) return std::nullopt;
      HookProbe h;
      h.u = u;
      h.t = t;
      h.v = v;
      const std::int64_t w = c.box_.translate(u, c.box_.directions()[v]);
      h.vertical_open = probe(c.vertical_key(u, t, v));
      h.horizontal_open =
          w >= 0 && probe(c.horizontal_key(static_cast<std::uint32_t>(
                                                c.ordering_.rank_between(u, c.box_.directions()[v])),
                                            *top));
      return h;
    }

    void run() {
      const ZdBox& box = c.box_;
      st.origin = box.center();
      st.height.assign(box.size(), INT_MIN);
      st.height[st.origin] = 0;
      st.S.emplace_back(st.origin, 0);
      std::vector<std::uint8_t> explored(c.ordering_.size(), 0);
      std::priority_queue<std::uint32_t, std::vector<std::uint32_t>, std::greater<>> frontier;
      auto push_incident = [&](std::uint32_t u) {
        for (const auto& ne : c.neighbor_edges_[u])
          if (!explored[ne.rank] && !st.in_projection(ne.other)) frontier.push(ne.rank);
      };
      push_incident(st.origin);
      if (box.in_shell(st.origin)) {
        st.outcome = Outcome::reached_boundary;
        return;
      }
      for (;;) {
        if (st.step >= c.options_.step_budget) {
          st.outcome = Outcome::budget_exhausted;
          return;
        }
        std::uint32_t rank = 0;
        std::uint32_t from = 0, to = 0;
        bool found = false;
        while (!frontier.empty()) {
          rank = frontier.top();
          frontier.pop();
          if (explored[rank]) continue;
          auto [x, y] = c.ordering_.endpoints(rank);
          const bool in_x = st.in_projection(x), in_y = st.in_projection(y);
          if (in_x == in_y) continue;  // both inside: no longer on the outer boundary
          from = in_x ? x : y;
          to = in_x ? y : x;
          found = true;
          break;
        }
        if (!found) {
          st.outcome = Outcome::died;
          return;
        }
        int v = -1;
        for (const auto& ne : c.neighbor_edges_[from])
          if (ne.rank == rank) v = ne.v;

        const std::int32_t level = st.height[from];
        ++st.step;
        StepRecord rec;
        rec.step = st.step;
        rec.edge = rank;
        rec.from = from;
        rec.to = to;
        rec.v = v;
        rec.level = level;
        if (probe(c.horizontal_key(rank, level))) {
          rec.condition = Condition::a;
          rec.added_t = level;
        } else {
          const auto h = hook(from, level, v);
          if (!h) {
            --st.step;
            st.outcome = Outcome::window_exhausted;
            return;
          }
          if (h->present()) {
            rec.condition = Condition::b;
            rec.added_t = *c.up(level);
          }
        }
        rec.eta = rec.condition != Condition::none;
        explored[rank] = 1;
        if (rec.eta) {
          st.A.push_back(rank);
          st.S.emplace_back(to, rec.added_t);
          st.height[to] = rec.added_t;
          st.max_height = std::max(st.max_height, rec.added_t);
          push_incident(to);
        } else {
          st.B.push_back(rank);
        }
        if (c.options_.record_trace) st.trace.push_back(rec);
        if (c.options_.check_every && st.step % c.options_.check_every == 0) quick_check();
        if (rec.eta && box.in_shell(to)) {
          st.outcome = Outcome::reached_boundary;
          return;
        }
      }
    }

    // O(1) bookkeeping identities; the full audit is verify_trace.
    void quick_check() {
      if (st.A.size() + 1 != st.S.size()) ++st.invariant_failures;
      if (st.A.size() + st.B.size() != st.step) ++st.invariant_failures;
      if (st.stale_probes != 0) ++st.invariant_failures;
    }
  };

  LatticeSpec spec_;
  ZdBox box_;
  EdgeOrdering ordering_;
  double p_;
  double q_;
  double qbar_;
  CouplingOptions options_;
  std::vector<std::vector<NeighborEdge>> neighbor_edges_;
};

namespace detail {

inline std::string vertex_str(const ZdBox& box, std::uint32_t u, std::int32_t t) {
  std::ostringstream os;
  os << "(";
  for (int x : box.coords(u)) os << x << ",";
  os << t << ")";
  return os.str();
}

}  // namespace detail

// Audit of a finished exploration against the structural claims of the coupling.
inline TraceReport Coupling::verify_trace(const CouplingState& st) const {
  TraceReport report;
  auto fail = [](TraceCheck& c, std::string detail) {
    if (c.passed) c.detail = std::move(detail);
    c.passed = false;
  };

  // tau: S -> S^pi, (u,t) -> u is a bijection, and heights agree with S.
  TraceCheck bij{"bijection", true, {}};
  {
    std::vector<char> seen_u(box_.size(), 0);
    std::size_t projected = 0;
    for (std::size_t i = 0; i < st.S.size(); ++i) {
      auto [u, t] = st.S[i];
      if (seen_u[u]) fail(bij, "u repeated in S at index " + std::to_string(i) + " " + detail::vertex_str(box_, u, t));
      seen_u[u] = 1;
      if (st.height[u] != t) fail(bij, "height map disagrees at " + detail::vertex_str(box_, u, t));
    }
    for (std::uint32_t u = 0; u < box_.size(); ++u) projected += st.in_projection(u) ? 1 : 0;
    if (projected != st.S.size()) fail(bij, "|S^pi| = " + std::to_string(projected) + " != |S| = " + std::to_string(st.S.size()));
    if (st.S.empty() || st.S[0] != std::make_pair(st.origin, std::int32_t{0})) fail(bij, "S_0 is not {(0,0)}");
  }
  report.checks.push_back(bij);

  TraceCheck card{"cardinality", true, {}};
  if (st.A.size() + 1 != st.S.size())
    fail(card, "|A| = " + std::to_string(st.A.size()) + ", |S| = " + std::to_string(st.S.size()));
  report.checks.push_back(card);

  // A and B disjoint, each edge explored once, sequences replay from the trace.
  TraceCheck mono{"monotonicity", true, {}};
  {
    std::vector<char> mark(ordering_.size(), 0);
    for (auto e : st.A) {
      if (mark[e]) fail(mono, "edge " + std::to_string(e) + " repeated in A");
      mark[e] = 1;
    }
    for (auto e : st.B) {
      if (mark[e]) fail(mono, "edge " + std::to_string(e) + " in A and B or repeated in B");
      mark[e] = 2;
    }
    if (st.A.size() + st.B.size() != st.step) fail(mono, "|A| + |B| != number of steps");
    if (options_.record_trace) {
      if (st.trace.size() != st.step) fail(mono, "trace length != step count");
      std::size_t ia = 0, ib = 0, is = 1;
      for (const auto& rec : st.trace) {
        if (rec.eta) {
          if (ia >= st.A.size() || st.A[ia] != rec.edge) fail(mono, "A out of order at step " + std::to_string(rec.step));
          if (is >= st.S.size() || st.S[is] != std::make_pair(rec.to, rec.added_t))
            fail(mono, "S out of order at step " + std::to_string(rec.step));
          ++ia;
          ++is;
        } else {
          if (ib >= st.B.size() || st.B[ib] != rec.edge) fail(mono, "B out of order at step " + std::to_string(rec.step));
          ++ib;
        }
      }
    }
  }
  report.checks.push_back(mono);

  // f_n is the earliest unexplored edge on the outer boundary of S^pi_{n-1}.
  TraceCheck order{"ordering", true, {}};
  if (options_.record_trace) {
    std::vector<char> in_pi(box_.size(), 0), explored(ordering_.size(), 0);
    in_pi[st.origin] = 1;
    std::set<std::uint32_t> boundary;
    auto refresh = [&](std::uint32_t u) {
      for (const auto& ne : neighbor_edges_[u]) {
        if (in_pi[ne.other]) boundary.erase(ne.rank);
        else if (!explored[ne.rank]) boundary.insert(ne.rank);
      }
    };
    refresh(st.origin);
    for (const auto& rec : st.trace) {
      if (boundary.empty() || *boundary.begin() != rec.edge) {
        fail(order, "step " + std::to_string(rec.step) + " explored edge " + std::to_string(rec.edge) +
                        " but earliest boundary edge is " +
                        (boundary.empty() ? std::string("none") : std::to_string(*boundary.begin())));
        break;
      }
      if (!in_pi[rec.from] || in_pi[rec.to]) fail(order, "f_n not on the outer boundary at step " + std::to_string(rec.step));
      explored[rec.edge] = 1;
      boundary.erase(rec.edge);
      if (rec.eta) {
        in_pi[rec.to] = 1;
        refresh(rec.to);
      }
    }
  }
  report.checks.push_back(order);

  // No omega-edge probed twice.
  TraceCheck fresh{"freshness", true, {}};
  {
    std::vector<ProbeKey> keys;
    keys.reserve(st.probes.size());
    for (const auto& pr : st.probes) keys.push_back(pr.key);
    std::sort(keys.begin(), keys.end());
    auto dup = std::adjacent_find(keys.begin(), keys.end());
    if (dup != keys.end()) {
      fail(fresh, std::string(dup->kind == ProbeKey::horizontal ? "horizontal" : "vertical") + " edge id=" +
                      std::to_string(dup->id) + " t=" + std::to_string(dup->t) + " probed twice");
    }
    if (st.stale_probes != 0) fail(fresh, std::to_string(st.stale_probes) + " stale probes recorded");
  }
  report.checks.push_back(fresh);

  std::unordered_map<ProbeKey, bool, ProbeKeyHash> value;
  for (const auto& pr : st.probes) value.emplace(pr.key, pr.open);

  // eta and the new height follow from the probed omega-edges.
  TraceCheck rule{"eta_rule", true, {}};
  if (options_.record_trace) {
    for (const auto& rec : st.trace) {
      auto look = [&](const ProbeKey& k) -> std::optional<bool> {
        auto it = value.find(k);
        if (it == value.end()) return std::nullopt;
        return it->second;
      };
      const auto a = look(horizontal_key(rec.edge, rec.level));
      bool ok = a.has_value();
      bool expect = false;
      std::int32_t expect_t = rec.level;
      if (ok && *a) {
        expect = true;
      } else if (ok) {
        const auto top = up(rec.level);
        const auto vert = look(vertical_key(rec.from, rec.level, rec.v));
        const auto hor = top ? look(horizontal_key(rec.edge, *top)) : std::nullopt;
        ok = vert.has_value() && (hor.has_value() || !*vert);
        expect = vert.value_or(false) && hor.value_or(false);
        if (top) expect_t = *top;
      }
      if (!ok) {
        fail(rule, "missing probe for step " + std::to_string(rec.step));
      } else if (expect != rec.eta || (rec.eta && rec.added_t != expect_t)) {
        fail(rule, "eta or height mismatch at step " + std::to_string(rec.step));
      }
    }
  }
  report.checks.push_back(rule);

  // Edges of A form a connected subgraph of Z^d containing the origin.
  TraceCheck conn_a{"a_connected", true, {}};
  {
    std::unordered_map<std::uint32_t, std::vector<std::uint32_t>> adj;
    for (auto e : st.A) {
      auto [x, y] = ordering_.endpoints(e);
      if (!st.in_projection(x) || !st.in_projection(y)) fail(conn_a, "A edge " + std::to_string(e) + " leaves S^pi");
      adj[x].push_back(y);
      adj[y].push_back(x);
    }
    std::unordered_set<std::uint32_t> reached{st.origin};
    std::vector<std::uint32_t> stack{st.origin};
    while (!stack.empty()) {
      const auto x = stack.back();
      stack.pop_back();
      for (auto y : adj[x])
        if (reached.insert(y).second) stack.push_back(y);
    }
    for (auto& [x, _] : adj)
      if (!reached.count(x)) fail(conn_a, "vertex " + detail::vertex_str(box_, x, 0) + " of A not connected to origin");
  }
  report.checks.push_back(conn_a);

  // Every vertex of S is joined to (0,0) by probed-open omega-edges.
  TraceCheck conn_s{"s_connected", true, {}};
  {
    using V = std::pair<std::uint32_t, std::int32_t>;
    struct VHash {
      std::size_t operator()(const V& x) const {
        return splitmix64((static_cast<std::uint64_t>(x.first) << 32) | static_cast<std::uint32_t>(x.second));
      }
    };
    std::unordered_map<V, std::vector<V>, VHash> adj;
    for (const auto& [k, open] : value) {
      if (!open) continue;
      auto [x, y] = endpoints(k);
      adj[x].push_back(y);
      adj[y].push_back(x);
    }
    std::unordered_set<V, VHash> reached{{st.origin, 0}};
    std::vector<V> stack{{st.origin, 0}};
    while (!stack.empty()) {
      const V x = stack.back();
      stack.pop_back();
      for (const auto& y : adj[x])
        if (reached.insert(y).second) stack.push_back(y);
    }
    for (const auto& x : st.S)
      if (!reached.count(x)) fail(conn_s, "S vertex " + detail::vertex_str(box_, x.first, x.second) + " not omega-connected");
  }
  report.checks.push_back(conn_s);

  TraceCheck loop{"in_loop_checks", true, {}};
  if (st.invariant_failures != 0) fail(loop, std::to_string(st.invariant_failures) + " in-loop failures");
  report.checks.push_back(loop);
  return report;
}

// Convenience wrapper: one exploration with lazily sampled omega.
inline CouplingState explore_coupled(const LatticeSpec& spec, double p, double q, std::uint64_t seed,
                                     std::size_t step_budget, std::uint32_t run = 0) {
  CouplingOptions options;
  options.step_budget = step_budget;
  return Coupling(spec, p, q, options).explore(seed, run);
}

struct EtaMarginal {
  Estimate estimate;  // frequency of eta(f_1) = 1
  double r = 0.0;     // effective_r(p, qbar)
  double z = 0.0;     // (estimate - r) / se, se from r
};

// Frequency of eta = 1 on the first step of independent explorations.
inline EtaMarginal eta_marginal_estimate(const LatticeSpec& spec, double p, double q, std::uint64_t n_probes,
                                         std::uint64_t seed, unsigned workers = 1) {
  CouplingOptions options;
  options.step_budget = 1;
  options.window = 2;
  const Coupling coupling(spec, p, q, options);
  constexpr std::uint64_t chunk = 4096;
  const std::uint64_t chunks = (n_probes + chunk - 1) / chunk;
  const auto counts = parallel_map(chunks, workers, [&](std::size_t j) {
    std::uint64_t ones = 0;
    const std::uint64_t end = std::min<std::uint64_t>(n_probes, (j + 1) * chunk);
    for (std::uint64_t i = j * chunk; i < end; ++i) {
      const CouplingState st = coupling.explore(seed, static_cast<std::uint32_t>(i));
      ones += st.A.size();
    }
    return ones;
  });
  std::uint64_t ones = 0;
  for (auto c : counts) ones += c;
  EtaMarginal out;
  out.estimate = proportion_estimate(ones, n_probes, 0.95, "eta_first_step");
  out.r = coupling.r();
  const double se_r = std::sqrt(out.r * (1.0 - out.r) / static_cast<double>(std::max<std::uint64_t>(n_probes, 1)));
  out.z = se_r > 0 ? (out.estimate.value - out.r) / se_r : (out.estimate.value == out.r ? 0.0 : INFINITY);
  return out;
}

// ---------------------------------------------------------------------------
// Law of |C(origin)| on the plain box versus the collapsed multigraph.

struct EquivalenceReport {
  bool exact = true;                 // false: two-sample fallback for large boxes
  std::vector<double> reference;     // P(|C(0)| = k), index k (exact law or plain MC)
  std::vector<std::uint64_t> counts; // collapsed-multigraph MC histogram, index k
  std::uint64_t samples = 0;
  double tv = 0.0;                   // total-variation distance
  double chi2 = 0.0;
  int dof = 0;
  double chi2_pvalue = 1.0;
  double noise_floor = 0.0;          // expected TV from multinomial noise alone
};

namespace detail {

inline std::uint32_t origin_cluster_size_small(const Lattice& lattice, std::uint64_t mask) {
  const std::uint32_t n = lattice.num_vertices();
  std::vector<std::uint32_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0u);
  auto find = [&](std::uint32_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  const auto edges = lattice.edges();
  for (std::size_t e = 0; e < edges.size(); ++e)
    if ((mask >> e) & 1u) parent[find(edges[e].a)] = find(edges[e].b);
  const std::uint32_t r = find(lattice.origin());
  std::uint32_t size = 0;
  for (std::uint32_t v = 0; v < n; ++v) size += find(v) == r ? 1 : 0;
  return size;
}

}  // namespace detail

inline EquivalenceReport equivalence_check(const LatticeSpec& plain_spec, double p, double q,
                                           std::uint64_t n_samples, std::uint64_t seed, unsigned workers = 1,
                                           std::size_t exact_edge_limit = 20) {
  if (plain_spec.s != 1) throw UnsupportedVariant("equivalence_check requires s = 1");
  LatticeSpec spec = collapse_multigraph(plain_spec);
  auto plain = std::make_shared<const Lattice>(spec);
  auto multi = std::make_shared<const Lattice>(build_multigraph(spec));
  const std::uint32_t nv = plain->num_vertices();

  EquivalenceReport rep;
  rep.samples = n_samples;
  rep.reference.assign(nv + 1, 0.0);
  rep.counts.assign(nv + 1, 0);
  rep.exact = plain->num_edges() <= exact_edge_limit;

  if (rep.exact) {
    const std::size_t ne = plain->num_edges();
    const auto edges = plain->edges();
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << ne); ++mask) {
      double w = 1.0;
      for (std::size_t e = 0; e < ne; ++e) {
        const double pe = edges[e].cls == EdgeClass::d_edge ? p : q;
        w *= ((mask >> e) & 1u) ? pe : 1.0 - pe;
      }
      if (w == 0.0) continue;
      rep.reference[detail::origin_cluster_size_small(*plain, mask)] += w;
    }
  } else {
    constexpr std::uint64_t chunk = 1024;
    const auto parts = parallel_map((n_samples + chunk - 1) / chunk, workers, [&](std::size_t j) {
      std::vector<std::uint64_t> h(nv + 1, 0);
      for (std::uint64_t i = j * chunk; i < std::min<std::uint64_t>(n_samples, (j + 1) * chunk); ++i) {
        const Configuration c = sample_configuration(plain, p, q, seed, SeedPlan::substream(1, static_cast<std::uint32_t>(i)));
        ++h[origin_cluster_size(c)];
      }
      return h;
    });
    for (const auto& h : parts)
      for (std::size_t k = 0; k <= nv; ++k) rep.reference[k] += static_cast<double>(h[k]) / n_samples;
  }

  constexpr std::uint64_t chunk = 1024;
  const auto parts = parallel_map((n_samples + chunk - 1) / chunk, workers, [&](std::size_t j) {
    std::vector<std::uint64_t> h(nv + 1, 0);
    for (std::uint64_t i = j * chunk; i < std::min<std::uint64_t>(n_samples, (j + 1) * chunk); ++i) {
      const Configuration m = sample_configuration(multi, p, q, seed, SeedPlan::substream(0, static_cast<std::uint32_t>(i)));
      ++h[origin_cluster_size(collapse_configuration(m, plain))];
    }
    return h;
  });
  for (const auto& h : parts)
    for (std::size_t k = 0; k <= nv; ++k) rep.counts[k] += h[k];

  const double n = static_cast<double>(std::max<std::uint64_t>(n_samples, 1));
  for (std::size_t k = 0; k <= nv; ++k) {
    const double emp = rep.counts[k] / n;
    const double ref = rep.reference[k];
    rep.tv += 0.5 * std::abs(emp - ref);
    rep.noise_floor += 0.5 * std::sqrt(2.0 * ref * (1.0 - ref) / (std::numbers::pi * n));
    if (ref > 0) {
      const double expected = ref * n;
      rep.chi2 += (rep.counts[k] - expected) * (rep.counts[k] - expected) / expected;
      ++rep.dof;
    }
  }
  rep.dof = std::max(0, rep.dof - 1);
  rep.chi2_pvalue = chi_squared_sf(rep.chi2, rep.dof);
  return rep;
}

// ---------------------------------------------------------------------------
// Boundary-reaching frequency of the coupled exploration versus plain Z^d.

struct DominationReport {
  Threshold threshold;
  bool below_threshold = false;  // q < 8 d^2 (p_c - p): run anyway, flagged
  DominationChain chain;
  Estimate coupled;  // reached_boundary fraction of the coupled exploration
  Estimate plain_r;  // plain Z^d percolation at r
  Estimate plain_p;  // plain Z^d percolation at p
  double z_vs_r = 0.0;
  bool consistent_with_r = false;  // |z_vs_r| <= 4
  bool dominates_p = false;        // coupled.hi >= plain_p.lo
};

// Does the open cluster of the centre of the free Z^d box at parameter x reach
// the boundary shell? Edges drawn lazily.
inline bool plain_reaches_boundary(const EdgeOrdering& ordering, double x, std::uint64_t seed, std::uint32_t run,
                                   std::uint32_t salt) {
  const ZdBox& box = ordering.box();
  const std::uint64_t thr = bernoulli_threshold(x);
  std::vector<char> seen(box.size(), 0);
  std::vector<std::uint32_t> stack{box.center()};
  seen[box.center()] = 1;
  while (!stack.empty()) {
    const std::uint32_t u = stack.back();
    stack.pop_back();
    if (box.in_shell(u)) return true;
    for (const auto& w : box.directions()) {
      const std::int64_t y = box.translate(u, w);
      if (y < 0 || seen[y]) continue;
      const auto rank = static_cast<std::uint32_t>(ordering.rank_between(u, w));
      const Counter c = philox4x32({rank, salt, run, tag(Domain::plain_exploration)}, seed);
      if (!bernoulli(c[0], thr)) continue;
      seen[y] = 1;
      stack.push_back(static_cast<std::uint32_t>(y));
    }
  }
  return false;
}

inline DominationReport domination_experiment(const LatticeSpec& spec, double p, double q, double p_c,
                                              std::uint64_t n_runs, std::uint64_t seed, unsigned workers = 1) {
  DominationReport rep;
  rep.threshold = theorem_threshold(spec.d, p, p_c);
  if (rep.threshold.vacuous)
    throw DomainError("domination_experiment: threshold 8d^2(p_c - p) = " + std::to_string(rep.threshold.raw) +
                      " exceeds 1, the bound says nothing here");
  rep.below_threshold = q < rep.threshold.value;
  rep.chain = verify_domination_chain(spec.d, p, q, p_c);

  CouplingOptions options;
  options.record_trace = false;
  const Coupling coupling(spec, p, q, options);
  const double r = coupling.r();
  struct Tally {
    std::uint64_t coupled = 0, at_r = 0, at_p = 0;
  };
  constexpr std::uint64_t chunk = 64;
  const auto tallies = parallel_map((n_runs + chunk - 1) / chunk, workers, [&](std::size_t j) {
    Tally t;
    for (std::uint64_t i = j * chunk; i < std::min<std::uint64_t>(n_runs, (j + 1) * chunk); ++i) {
      const auto run = static_cast<std::uint32_t>(i);
      t.coupled += coupling.explore(seed, run).outcome == Outcome::reached_boundary;
      t.at_r += plain_reaches_boundary(coupling.ordering(), r, seed, run, 0);
      t.at_p += plain_reaches_boundary(coupling.ordering(), p, seed, run, 1);
    }
    return t;
  });
  Tally total;
  for (const auto& t : tallies) {
    total.coupled += t.coupled;
    total.at_r += t.at_r;
    total.at_p += t.at_p;
  }
  rep.coupled = proportion_estimate(total.coupled, n_runs, 0.95, "coupled_reached_boundary");
  rep.plain_r = proportion_estimate(total.at_r, n_runs, 0.95, "plain_r_reached_boundary");
  rep.plain_p = proportion_estimate(total.at_p, n_runs, 0.95, "plain_p_reached_boundary");
  rep.z_vs_r = two_proportion_z(rep.coupled, rep.plain_r);
  rep.consistent_with_r = std::abs(rep.z_vs_r) <= 4.0;
  rep.dominates_p = rep.coupled.hi >= rep.plain_p.lo;
  return rep;
}

}  // namespace anisoperc
