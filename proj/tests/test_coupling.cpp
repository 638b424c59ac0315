#include "doctest.h"

#include <map>

#include "anisoperc/coupling.hpp"

using namespace anisoperc;

namespace {

const LatticeSpec kSpec = LatticeSpec::nearest(2, 1, 9, 2, Boundary::free);

struct MapOmega {
  std::map<ProbeKey, bool> open;
  bool fallback = false;
  bool operator()(const ProbeKey& k) const {
    auto it = open.find(k);
    return it == open.end() ? fallback : it->second;
  }
};

void require_clean(const Coupling& c, const CouplingState& st) {
  const TraceReport rep = c.verify_trace(st);
  for (const auto& chk : rep.checks) {
    INFO(chk.name << ": " << chk.detail);
    CHECK(chk.passed);
  }
}

}  // namespace

TEST_CASE("coupling refuses unsupported lattices") {
  CHECK_THROWS_AS(Coupling(LatticeSpec::nearest(2, 2, 9, 3, Boundary::free), 0.5, 0.5), UnsupportedVariant);
  CHECK_THROWS_AS(Coupling(LatticeSpec::nearest(2, 1, 9, 3, Boundary::periodic), 0.5, 0.5), UnsupportedVariant);
  CHECK_THROWS_AS(Coupling(LatticeSpec::nearest(2, 1, 2, 3, Boundary::free), 0.5, 0.5), SpecError);
}

TEST_CASE("all-open omega: every eta = 1 by condition (a) in layer 0") {
  const Coupling c(kSpec, 1.0, 1.0);
  const CouplingState st = c.explore_with([](const ProbeKey&) { return true; });
  CHECK(st.outcome == Outcome::reached_boundary);
  CHECK(st.B.empty());
  CHECK(st.S.size() == st.step + 1);
  for (const auto& rec : st.trace) {
    CHECK(rec.condition == Condition::a);
    CHECK(rec.added_t == 0);
  }
  for (const auto& [u, t] : st.S) CHECK(t == 0);
  require_clean(c, st);
}

TEST_CASE("all-closed omega: S stays {(0,0)} and the frontier empties") {
  const Coupling c(kSpec, 0.0, 0.0);
  const CouplingState st = c.explore_with([](const ProbeKey&) { return false; });
  CHECK(st.outcome == Outcome::died);
  CHECK(st.A.empty());
  CHECK(st.B.size() == 4);
  CHECK(st.S.size() == 1);
  require_clean(c, st);
}

TEST_CASE("hand-built omega: a v-hook carries eta(f_1) = 1 to height 1") {
  const Coupling c(kSpec, 0.5, 0.5);
  const std::uint32_t o = c.box().center();
  // f_1 is the lowest-ranked edge at the origin.
  std::uint32_t f1 = UINT32_MAX;
  int v = -1;
  for (std::size_t k = 0; k < c.box().directions().size(); ++k) {
    const auto r = static_cast<std::uint32_t>(c.ordering().rank_between(o, c.box().directions()[k]));
    if (r < f1) {
      f1 = r;
      v = static_cast<int>(k);
    }
  }
  MapOmega omega;
  omega.open[c.horizontal_key(f1, 0)] = false;
  omega.open[c.vertical_key(o, 0, v)] = true;
  omega.open[c.horizontal_key(f1, 1)] = true;
  CouplingOptions opt;
  opt.step_budget = 1;
  const Coupling one(kSpec, 0.5, 0.5, opt);
  const CouplingState st = one.explore_with(omega);
  REQUIRE(st.trace.size() == 1);
  CHECK(st.trace[0].edge == f1);
  CHECK(st.trace[0].condition == Condition::b);
  CHECK(st.trace[0].eta);
  const auto to = static_cast<std::uint32_t>(c.box().translate(o, c.box().directions()[v]));
  REQUIRE(st.S.size() == 2);
  CHECK(st.S[1] == std::make_pair(to, std::int32_t{1}));
  require_clean(one, st);

  // Same omega without the vertical edge: eta(f_1) = 0.
  omega.open[c.vertical_key(o, 0, v)] = false;
  const CouplingState st0 = one.explore_with(omega);
  CHECK_FALSE(st0.trace[0].eta);
  CHECK(st0.S.size() == 1);
}

TEST_CASE("v-hook presence") {
  const Coupling c(kSpec, 0.5, 0.5);
  const std::uint32_t o = c.box().center();
  CouplingState st;
  const auto h = c.vhook_present(st, [](const ProbeKey&) { return true; }, o, 0, 0);
  CHECK(h.present());
  MapOmega omega;
  omega.fallback = true;
  const auto w = static_cast<std::uint32_t>(c.ordering().rank_between(o, c.box().directions()[0]));
  omega.open[c.horizontal_key(w, 1)] = false;
  CouplingState st2;
  const auto h2 = c.vhook_present(st2, omega, o, 0, 0);
  CHECK(h2.vertical_open);
  CHECK_FALSE(h2.horizontal_open);
  CHECK_FALSE(h2.present());
}

TEST_CASE("bilayer hooks from t = 1 use the edges into t = 0") {
  const Coupling c(LatticeSpec::layered(2, 9, 1), 0.5, 0.5);
  CHECK(c.up(1) == 0);
  CHECK(c.up(0) == 1);
  const ProbeKey k = c.vertical_key(3, 1, 2);
  CHECK(k.t == 0);
  CHECK(k == c.vertical_key(3, 0, 2));
  const auto [a, b] = c.endpoints(k);
  CHECK(a.second == 0);
  CHECK(b.second == 1);
  for (std::uint32_t run = 0; run < 100; ++run) require_clean(c, c.explore(17, run));
}

TEST_CASE("window exhaustion") {
  CouplingOptions opt;
  opt.window = 1;
  const Coupling c(kSpec, 0.0, 1.0, opt);
  const CouplingState st = c.explore(3, 0);
  CHECK(st.outcome == Outcome::window_exhausted);
  CHECK(st.step == 0);
}

TEST_CASE("random explorations pass every trace check") {
  const LatticeSpec spec = LatticeSpec::nearest(2, 1, 33, 2, Boundary::free);
  CouplingOptions opt;
  opt.check_every = 1;
  const Coupling c(spec, 0.45, 0.2, opt);
  std::map<Outcome, int> outcomes;
  for (std::uint32_t run = 0; run < 300; ++run) {
    const CouplingState st = c.explore(2024, run);
    ++outcomes[st.outcome];
    REQUIRE(c.verify_trace(st).ok());
    CHECK(st.invariant_failures == 0);
  }
  CHECK(outcomes[Outcome::died] > 0);
  const auto st = explore_coupled(spec, 0.45, 0.2, 2024, 5, 7);
  CHECK(st.step <= 5);
}

TEST_CASE("a corrupted trace is caught") {
  const Coupling c(kSpec, 0.6, 0.3);
  CouplingState st = c.explore(5, 1);
  REQUIRE(st.A.size() >= 2);
  CouplingState dup = st;
  dup.probes.push_back(dup.probes.front());
  CHECK_FALSE(c.verify_trace(dup).find("freshness")->passed);
  CouplingState moved = st;
  moved.S[1].second += 1;
  CHECK_FALSE(c.verify_trace(moved).ok());
  CouplingState swapped = st;
  std::swap(swapped.A[0], swapped.A[1]);
  CHECK_FALSE(c.verify_trace(swapped).find("monotonicity")->passed);
}

TEST_CASE("eta marginal") {
  const LatticeSpec spec = LatticeSpec::nearest(2, 1, 5, 2, Boundary::free);
  CHECK(eta_marginal_estimate(spec, 1.0, 0.3, 500, 1).estimate.value == 1.0);
  CHECK(eta_marginal_estimate(spec, 0.0, 0.7, 500, 1).estimate.value == 0.0);
  const EtaMarginal m = eta_marginal_estimate(spec, 0.45, 0.2, 20000, 9, 2);
  CHECK(m.r == doctest::Approx(0.463430).epsilon(1e-6));
  CHECK(std::abs(m.z) <= 4.0);
}

TEST_CASE("multigraph equivalence") {
  const LatticeSpec box = LatticeSpec::nearest(1, 1, 2, 2, Boundary::free);
  for (double q : {0.0, 1.0}) {
    const EquivalenceReport r = equivalence_check(box, 0.5, q, 20000, 4);
    CHECK(r.exact);
    CHECK(r.tv <= 0.02);
  }
  const EquivalenceReport r = equivalence_check(box, 0.5, 0.3, 200000, 5, 2);
  CHECK(r.exact);
  CHECK(r.tv < 0.01);
  CHECK(r.chi2_pvalue > 1e-4);
  double total = 0;
  for (double x : r.reference) total += x;
  CHECK(total == doctest::Approx(1.0));
  const EquivalenceReport mc = equivalence_check(LatticeSpec::nearest(2, 1, 3, 3, Boundary::free), 0.4, 0.3, 20000, 6, 2);
  CHECK_FALSE(mc.exact);
  CHECK(mc.chi2_pvalue > 1e-4);
}

TEST_CASE("domination experiment") {
  const LatticeSpec spec = LatticeSpec::nearest(2, 1, 17, 2, Boundary::free);
  const DominationReport rep = domination_experiment(spec, 0.49, 0.33, 0.5, 600, 3, 2);
  CHECK_FALSE(rep.below_threshold);
  CHECK(rep.chain.holds);
  CHECK(rep.consistent_with_r);
  CHECK(rep.dominates_p);
  CHECK(rep.coupled.value > 0.0);
  CHECK_THROWS_AS(domination_experiment(spec, 0.45, 0.2, 0.5, 10, 1), DomainError);
}
