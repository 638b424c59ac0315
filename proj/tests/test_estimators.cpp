#include "doctest.h"

#include <cmath>

#include "anisoperc/estimators.hpp"
#include "oracles.hpp"

using namespace anisoperc;

namespace {

std::shared_ptr<const Lattice> make(const LatticeSpec& s) { return std::make_shared<const Lattice>(s); }

CurvePoint exact_point(double p, double q) {
  CurvePoint pt;
  pt.p = p;
  pt.qc = pt.lo = pt.hi = q;
  return pt;
}

}  // namespace

TEST_CASE("theta proxy") {
  auto lat = make(LatticeSpec::nearest(2, 1, 8, 4));
  CHECK(estimate_theta_proxy(lat, 1, 1, 20).value == 1.0);
  CHECK(estimate_theta_proxy(lat, 0, 0, 20).value == 0.0);
  auto box = make(LatticeSpec::nearest(2, 1, 8, 4, Boundary::free));
  CHECK(estimate_theta_proxy(box, 1, 1, 5, Surrogate::origin_to_boundary).value == 1.0);
  CHECK(estimate_theta_proxy(box, 0, 0, 5, Surrogate::origin_to_boundary).value == 0.0);
  CHECK_THROWS_AS(estimate_theta_proxy(lat, 0.5, 0.5, 5, Surrogate::origin_to_boundary), SpecError);
  CHECK_THROWS_AS(estimate_theta_proxy(lat, 0.5, 0.5, 0), DomainError);

  // Homogeneous d=1, s=1 at 1/2 on an (L+1) x L box crosses with probability 1/2.
  auto planar = make(LatticeSpec::nearest(1, 1, 25, 24, Boundary::free));
  SampleOptions opt;
  opt.seed = 77;
  opt.workers = 2;
  const Estimate e = estimate_theta_proxy(planar, 0.5, 0.5, 20000, Surrogate::spanning, 0, opt);
  CHECK(std::abs(e.value - 0.5) <= 3.5 * std::sqrt(0.25 / 20000));
  CHECK(e.lo <= e.value);
  CHECK(e.value <= e.hi);
}

TEST_CASE("results do not depend on the worker count") {
  auto lat = make(LatticeSpec::nearest(2, 1, 12, 4));
  SampleOptions one, three;
  one.seed = three.seed = 5;
  three.workers = 3;
  CHECK(estimate_theta_proxy(lat, 0.4, 0.3, 301, Surrogate::spanning, 0, one).value ==
        estimate_theta_proxy(lat, 0.4, 0.3, 301, Surrogate::spanning, 0, three).value);
  CHECK(estimate_chi(lat, 0.3, 0.1, 200, one).estimate.value == estimate_chi(lat, 0.3, 0.1, 200, three).estimate.value);
  BisectOptions b1, b3;
  b1.n_per_probe = b3.n_per_probe = 50;
  b1.tol = b3.tol = 0.05;
  b3.sampling.workers = 3;
  const CurvePoint x = estimate_qc_bisect(LatticeSpec::nearest(2, 1, 8, 4), 0.4, 8, b1);
  const CurvePoint y = estimate_qc_bisect(LatticeSpec::nearest(2, 1, 8, 4), 0.4, 8, b3);
  CHECK(x.qc == y.qc);
  CHECK(x.samples == y.samples);
}

TEST_CASE("chi") {
  auto lat = make(LatticeSpec::nearest(2, 1, 6, 4));
  const ChiEstimate zero = estimate_chi(lat, 0, 0, 10);
  CHECK(zero.estimate.value == 1.0);
  CHECK(zero.estimate.se == 0.0);

  SUBCASE("free chain of 64 sites at p = 1/2") {
    auto chain = make(LatticeSpec::nearest(1, 0, 64, 2, Boundary::free));
    const double p = 0.5;
    // origin at 32: 32 sites to the left, 31 to the right
    double exact = 1;
    for (int k = 1; k <= 32; ++k) exact += std::pow(p, k);
    for (int k = 1; k <= 31; ++k) exact += std::pow(p, k);
    SampleOptions o;
    o.level = 0.999;
    const ChiEstimate c = estimate_chi(chain, p, 0, 40000, o);
    CHECK(c.estimate.lo <= exact);
    CHECK(exact <= c.estimate.hi);
    CHECK(std::abs(exact - (1 + p) / (1 - p)) < 1e-8);
  }
  SUBCASE("ring of L sites") {
    const int L = 10;
    const double p = 0.6;
    double exact = 1;
    for (int k = 1; k < L; ++k) exact += std::pow(p, k) + std::pow(p, L - k) - std::pow(p, L);
    auto ring = make(LatticeSpec::nearest(1, 0, L, 2, Boundary::periodic));
    SampleOptions o;
    o.level = 0.999;
    const ChiEstimate c = estimate_chi(ring, p, 0, 40000, o);
    CHECK(c.estimate.lo <= exact);
    CHECK(exact <= c.estimate.hi);
    // only a fully open ring winds
    const double wind = std::pow(p, L);
    CHECK(std::abs(c.boundary_fraction - wind) <= 4 * std::sqrt(wind * (1 - wind) / 40000));
    CHECK_FALSE(c.truncated);
  }
  SUBCASE("2x2x3 box matches exhaustive enumeration") {
    auto box = make(LatticeSpec::nearest(2, 1, 2, 3, Boundary::free));
    REQUIRE(box->num_edges() == 20);
    const double p = 0.3, q = 0.1;
    double exact = 0;
    oracle::enumerate(box, p, q, [&](const Configuration& c, double w) { exact += w * origin_cluster_size(c); });
    SampleOptions o;
    o.level = 0.999;
    const ChiEstimate c = estimate_chi(box, p, q, 50000, o);
    CHECK(c.estimate.lo <= exact);
    CHECK(exact <= c.estimate.hi);
  }
}

TEST_CASE("bisection recovers a synthetic logistic crossing, 100 of 100 runs") {
  BisectOptions opt;
  opt.n_per_probe = 200;
  opt.tol = 0.01;
  int good = 0;
  for (std::uint32_t run = 0; run < 100; ++run) {
    const double qstar = 0.1 + 0.8 * ((run * 37) % 100) / 100.0;
    const double width = 0.004;
    auto hits = [&](double q, std::uint64_t n, std::uint32_t experiment) {
      const double prob = 1.0 / (1.0 + std::exp(-(q - qstar) / width));
      Stream rng(run, experiment);
      const std::uint64_t thr = bernoulli_threshold(prob);
      std::uint64_t k = 0;
      for (std::uint64_t i = 0; i < n; ++i) k += bernoulli(rng(), thr);
      return k;
    };
    const CurvePoint pt = bisect_crossing(hits, opt);
    const bool ok = std::abs(pt.qc - qstar) <= opt.tol && pt.lo <= qstar && qstar <= pt.hi;
    good += ok;
    if (!ok) MESSAGE("run " << run << " q* = " << qstar << " got " << pt.qc << " [" << pt.lo << ", " << pt.hi << "]");
  }
  CHECK(good == 100);
}

TEST_CASE("bisection edge cases") {
  BisectOptions opt;
  opt.n_per_probe = 100;
  opt.tol = 0.02;
  SUBCASE("supercritical p gives q_c = 0 with a flag") {
    const CurvePoint pt = estimate_qc_bisect(LatticeSpec::nearest(2, 1, 16, 4), 0.7, 16, opt);
    CHECK(pt.qc == 0.0);
    CHECK(pt.flag == "supercritical_at_q0");
  }
  SUBCASE("p = 0 never spans a Z^d axis") {
    const CurvePoint pt = estimate_qc_bisect(LatticeSpec::nearest(2, 1, 8, 4), 0.0, 8, opt);
    CHECK(pt.qc == 1.0);
    CHECK(pt.flag == "no_crossing_at_q1");
  }
  SUBCASE("intervals and bookkeeping") {
    const CurvePoint pt = estimate_qc_bisect(LatticeSpec::nearest(2, 1, 12, 4), 0.4, 12, opt);
    CHECK(pt.flag.empty());
    CHECK(pt.lo <= pt.qc);
    CHECK(pt.qc <= pt.hi);
    CHECK(pt.lo >= 0.0);
    CHECK(pt.hi <= 1.0);
    CHECK(pt.L == 12);
    std::uint64_t n = 0;
    for (const auto& s : pt.trace) n += s.n;
    CHECK(n == pt.samples);
  }
  CHECK_THROWS_AS(estimate_qc_bisect(LatticeSpec::nearest(2, 1, 8, 4), 1.0, 8, opt), DomainError);
  opt.tol = 1e-4;
  CHECK_THROWS_AS(estimate_qc_bisect(LatticeSpec::nearest(2, 1, 8, 4), 0.3, 8, opt), DomainError);
}

TEST_CASE("estimated curve is non-increasing in p up to its intervals") {
  BisectOptions opt;
  opt.n_per_probe = 200;
  opt.tol = 0.01;
  std::vector<CurvePoint> pts;
  for (double p : {0.3, 0.38, 0.44}) pts.push_back(estimate_qc_bisect(LatticeSpec::nearest(2, 1, 16, 4), p, 16, opt));
  for (std::size_t i = 1; i < pts.size(); ++i) CHECK(pts[i].lo <= pts[i - 1].hi);
  CHECK(pts.back().qc < pts.front().qc);
}

TEST_CASE("crossover exponent fit") {
  const double pc = 0.5;
  SUBCASE("exact power law psi = 2") {
    std::vector<CurvePoint> pts;
    for (double p : {0.40, 0.42, 0.44, 0.46, 0.48}) pts.push_back(exact_point(p, 0.7 * std::pow(pc - p, 2.0)));
    const ExponentFit f = fit_crossover_exponent(pts, pc);
    CHECK(std::abs(f.slope - 2.0) < 1e-9);
    CHECK(std::abs(f.intercept - std::log(0.7)) < 1e-9);
    for (double r : f.residuals) CHECK(std::abs(r) < 1e-9);
  }
  SUBCASE("linear law") {
    std::vector<CurvePoint> pts;
    for (double p : {0.40, 0.45, 0.49}) pts.push_back(exact_point(p, 3.0 * (pc - p)));
    CHECK(std::abs(fit_crossover_exponent(pts, pc).slope - 1.0) < 1e-9);
  }
  SUBCASE("weighted fit with interval widths, covariance from scatter") {
    std::vector<CurvePoint> pts;
    const double ps[] = {0.40, 0.42, 0.44, 0.46, 0.48};
    const double noise[] = {0.02, -0.03, 0.01, 0.03, -0.02};
    for (int i = 0; i < 5; ++i) {
      CurvePoint pt = exact_point(ps[i], 2.0 * std::pow(pc - ps[i], 2.3) * std::exp(noise[i]));
      pt.lo = pt.qc * 0.9;
      pt.hi = pt.qc * 1.1;
      pts.push_back(pt);
    }
    const ExponentFit f = fit_crossover_exponent(pts, pc);
    CHECK(f.slope == doctest::Approx(2.3).epsilon(0.05));
    CHECK(f.cov[0][0] > 0);
    CHECK(f.slope_se() < 0.5);
  }
  SUBCASE("points with an interval touching 0 are refused") {
    std::vector<CurvePoint> pts;
    for (double p : {0.40, 0.44, 0.48}) pts.push_back(exact_point(p, pc - p));
    CurvePoint bad = exact_point(0.46, 0.01);
    bad.lo = 0.0;
    pts.push_back(bad);
    const ExponentFit f = fit_crossover_exponent(pts, pc);
    CHECK(f.rejected == 1);
    CHECK(f.x.size() == 3);
    pts.pop_back();
    pts.pop_back();
    CHECK_THROWS_AS(fit_crossover_exponent(pts, pc), DomainError);
  }
}

TEST_CASE("bound check") {
  CHECK(bound_check(exact_point(0.45, 0.9), 2, 0.5).holds);
  CHECK(bound_check(exact_point(0.45, 0.9), 2, 0.5).threshold.vacuous);
  CurvePoint pt = exact_point(0.49, 0.2);
  pt.hi = 0.3;
  BoundReport r = bound_check(pt, 2, 0.5);
  CHECK(r.bound == doctest::Approx(0.32));
  CHECK(r.holds);
  CHECK(r.ratio == doctest::Approx(20.0));
  pt.hi = 0.33;
  CHECK_FALSE(bound_check(pt, 2, 0.5).holds);
}

TEST_CASE("conjecture diagnostic") {
  BisectOptions opt;
  opt.n_per_probe = 60;
  opt.tol = 0.05;
  CHECK(conjecture_diagnostic({}, LatticeSpec::nearest(2, 1, 8, 4), 8, 10, opt).rows.empty());
  const Diagnostic d1 = conjecture_diagnostic({0.3, 0.5}, LatticeSpec::nearest(1, 1, 16, 4), 16, 200, opt);
  REQUIRE(d1.rows.size() == 2);
  CHECK(d1.rows[0].chi_exact == doctest::Approx(1.3 / 0.7));
  CHECK(d1.rows[0].product == doctest::Approx(d1.rows[0].curve.qc * d1.rows[0].chi.estimate.value));
  CHECK(d1.product_min <= d1.product_max);
}

TEST_CASE("literature p_c table") {
  CHECK(*literature_pc(2) == 0.5);
  CHECK(literature_pc(9) == std::nullopt);
  for (int d = 2; d <= 8; ++d) CHECK(*literature_pc(d) > 1.0 / (2 * d));
}
