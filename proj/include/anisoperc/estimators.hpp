#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "anisoperc/clusters.hpp"
#include "anisoperc/error.hpp"
#include "anisoperc/lattice.hpp"
#include "anisoperc/parallel.hpp"
#include "anisoperc/rng.hpp"
#include "anisoperc/sampling.hpp"
#include "anisoperc/stats.hpp"

namespace anisoperc {

// Finite-volume stand-ins for theta(p,q) > 0.
enum class Surrogate : std::uint8_t {
  spanning,            // a cluster crosses the box along `axis` (wraps, on a ring axis)
  origin_to_boundary,  // the origin's cluster meets the shell of a free Z^d box
};

inline std::string to_string(Surrogate s) {
  return s == Surrogate::spanning ? "spanning" : "origin_to_boundary";
}

inline Surrogate parse_surrogate(const std::string& s) {
  if (s == "spanning" || s == "wrapping") return Surrogate::spanning;
  if (s == "origin_to_boundary") return Surrogate::origin_to_boundary;
  throw SpecError("unknown surrogate '" + s + "' (expected spanning|origin_to_boundary)");
}

// Literature values of the homogeneous bond threshold p_c(d); inputs, not
// outputs. d = 2 is exact; the others are numerical estimates.
inline std::optional<double> literature_pc(int d) {
  switch (d) {
    case 2: return 0.5;
    case 3: return 0.2488126;
    case 4: return 0.1601314;
    case 5: return 0.118172;
    case 6: return 0.0942019;
    case 7: return 0.0786752;
    case 8: return 0.06770839;
    default: return std::nullopt;
  }
}

struct SampleOptions {
  std::uint64_t seed = 1;
  std::uint32_t experiment = 0;  // high half of the stream id; replicas fill the low half
  unsigned workers = 1;
  double level = 0.95;
};

// Replica-parallel sum over configurations; fn(config) -> T, T summable with +=.
template <typename T, typename Fn>
T reduce_samples(const std::shared_ptr<const Lattice>& lattice, double p, double q, std::uint64_t n,
                 const SampleOptions& opt, Fn&& fn) {
  constexpr std::uint64_t chunk = 32;
  const auto parts = parallel_map((n + chunk - 1) / chunk, opt.workers, [&](std::size_t j) {
    T acc{};
    for (std::uint64_t i = j * chunk; i < std::min<std::uint64_t>(n, (j + 1) * chunk); ++i) {
      const Configuration c =
          sample_configuration(lattice, p, q, opt.seed, SeedPlan::substream(opt.experiment, static_cast<std::uint32_t>(i)));
      acc += fn(c);
    }
    return acc;
  });
  T total{};
  for (const auto& part : parts) total += part;
  return total;
}

inline bool surrogate_fires(const Configuration& c, Surrogate surrogate, int axis) {
  const Lattice& lattice = c.lattice();
  if (surrogate == Surrogate::spanning) {
    return spans(lattice, label_clusters(c, lattice.is_ring(axis)), axis);
  }
  if (lattice.spec().boundary_d != Boundary::free)
    throw SpecError("origin_to_boundary surrogate requires a free Z^d boundary");
  return reaches_boundary(lattice, label_clusters(c), lattice.origin());
}

inline Estimate estimate_theta_proxy(const std::shared_ptr<const Lattice>& lattice, double p, double q,
                                     std::uint64_t n, Surrogate surrogate = Surrogate::spanning, int axis = 0,
                                     const SampleOptions& opt = {}) {
  if (n < 1) throw DomainError("estimate_theta_proxy: n must be >= 1");
  if (axis < 0 || axis >= lattice->dims()) throw SpecError("estimate_theta_proxy: axis out of range");
  const auto hits = reduce_samples<std::uint64_t>(lattice, p, q, n, opt, [&](const Configuration& c) {
    return static_cast<std::uint64_t>(surrogate_fires(c, surrogate, axis));
  });
  return proportion_estimate(hits, n, opt.level, to_string(surrogate));
}

struct ChiEstimate {
  Estimate estimate;
  double boundary_fraction = 0.0;  // samples whose largest cluster meets the boundary
  bool truncated = false;          // boundary_fraction > 1%
};

namespace detail {

// Does the cluster rooted at r touch a free face or wind around a ring axis?
inline bool touches_boundary(const Lattice& lattice, const ClusterLabeling& labels, std::uint32_t r) {
  for (int a = 0; a < lattice.dims(); ++a)
    if (lattice.is_ring(a) && labels.winds(r, a)) return true;
  for (std::uint32_t v = 0; v < labels.root.size(); ++v) {
    if (labels.root[v] != r) continue;
    for (int a = 0; a < lattice.dims(); ++a) {
      if (lattice.is_ring(a)) continue;
      const int x = lattice.coordinate(v, a);
      if (x == 0 || x == lattice.side(a) - 1) return true;
    }
  }
  return false;
}

struct ChiTally {
  long double sum = 0, sum_sq = 0;
  std::uint64_t touching = 0;
  ChiTally& operator+=(const ChiTally& o) {
    sum += o.sum;
    sum_sq += o.sum_sq;
    touching += o.touching;
    return *this;
  }
};

}  // namespace detail

// Mean size of the origin's cluster.
inline ChiEstimate estimate_chi(const std::shared_ptr<const Lattice>& lattice, double p, double q, std::uint64_t n,
                                const SampleOptions& opt = {}) {
  if (n < 1) throw DomainError("estimate_chi: n must be >= 1");
  const bool track = has_ring_axis(*lattice);
  const auto tally = reduce_samples<detail::ChiTally>(lattice, p, q, n, opt, [&](const Configuration& c) {
    const ClusterLabeling labels = label_clusters(c, track);
    const long double size = labels.cluster_size(lattice->origin());
    std::uint32_t max_root = labels.root[0];
    for (std::uint32_t v = 0; v < labels.root.size(); ++v)
      if (labels.root[v] == v && labels.size[v] > labels.size[max_root]) max_root = v;
    detail::ChiTally t;
    t.sum = size;
    t.sum_sq = size * size;
    t.touching = detail::touches_boundary(*lattice, labels, max_root) ? 1 : 0;
    return t;
  });
  ChiEstimate out;
  out.estimate = mean_estimate(tally.sum, tally.sum_sq, n, opt.level, "chi");
  out.boundary_fraction = static_cast<double>(tally.touching) / static_cast<double>(n);
  out.truncated = out.boundary_fraction > 0.01;
  return out;
}

// ---------------------------------------------------------------------------
// Critical curve by bisection on the crossing probability.

struct BisectStep {
  double bracket_lo = 0.0;
  double bracket_hi = 1.0;
  double q = 0.0;
  std::uint64_t n = 0;
  std::uint64_t hits = 0;
  double ci_lo = 0.0;
  double ci_hi = 1.0;
  bool forced = false;  // CI still contained 1/2 at the sample cap
  bool went_down = false;  // crossing probability judged above 1/2: q_c <= q
};

struct CurvePoint {
  double p = 0.0;
  double qc = 0.0;
  double lo = 0.0;
  double hi = 1.0;
  int L = 0;
  std::uint64_t samples = 0;
  std::string flag;  // "", "supercritical_at_q0", "no_crossing_at_q1"
  std::vector<BisectStep> trace;
};

struct BisectOptions {
  std::uint64_t n_per_probe = 200;
  std::uint64_t max_factor = 16;  // cap on n per probe = max_factor * n_per_probe
  double tol = 1e-2;
  Surrogate surrogate = Surrogate::spanning;
  int axis = 0;
  double target = 0.5;
  SampleOptions sampling;
};

// Bisection for the q where a monotone crossing probability equals opt.target.
// hits(q, n, experiment) returns the number of successes among n fresh trials
// at q drawn from sub-experiment `experiment`.
template <typename Hits>
CurvePoint bisect_crossing(Hits&& hits, const BisectOptions& opt) {
  if (!(opt.tol >= 1e-3)) throw DomainError("bisect: tol must be >= 1e-3");
  if (opt.n_per_probe < 1) throw DomainError("bisect: n_per_probe must be >= 1");
  CurvePoint point;
  // Probe j uses sub-experiment base + j: common random numbers across calls.
  std::uint32_t experiment = opt.sampling.experiment;
  auto run = [&](double q, std::uint64_t n) {
    point.samples += n;
    return static_cast<std::uint64_t>(hits(q, n, experiment++));
  };

  const std::uint64_t cap = opt.n_per_probe * std::max<std::uint64_t>(1, opt.max_factor);

  // Accumulate samples at q until the interval excludes the target or the cap is hit.
  auto probe = [&](double q, double blo, double bhi) {
    BisectStep step;
    step.bracket_lo = blo;
    step.bracket_hi = bhi;
    step.q = q;
    std::uint64_t batch = opt.n_per_probe;
    for (;;) {
      step.hits += run(q, batch);
      step.n += batch;
      const Estimate e = proportion_estimate(step.hits, step.n, opt.sampling.level);
      step.ci_lo = e.lo;
      step.ci_hi = e.hi;
      if (e.lo > opt.target || e.hi < opt.target) {
        step.went_down = e.lo > opt.target;
        break;
      }
      if (step.n >= cap) {
        step.forced = true;
        step.went_down = e.value >= opt.target;
        break;
      }
      batch = step.n;  // double the total
    }
    point.trace.push_back(step);
    return step;
  };

  const BisectStep at0 = probe(0.0, 0.0, 1.0);
  if (at0.went_down && !at0.forced) {
    point.qc = point.lo = point.hi = 0.0;
    point.flag = "supercritical_at_q0";
    return point;
  }
  const BisectStep at1 = probe(1.0, 0.0, 1.0);
  if (!at1.went_down && !at1.forced) {
    point.qc = point.lo = point.hi = 1.0;
    point.flag = "no_crossing_at_q1";
    return point;
  }

  double lo = 0.0, hi = 1.0;
  double und_lo = std::numeric_limits<double>::infinity();
  double und_hi = -std::numeric_limits<double>::infinity();
  if (at0.forced) und_lo = 0.0;
  if (at1.forced) und_hi = 1.0;
  while (hi - lo > opt.tol) {
    const double mid = 0.5 * (lo + hi);
    const BisectStep step = probe(mid, lo, hi);
    if (step.forced) {
      und_lo = std::min(und_lo, lo);
      und_hi = std::max(und_hi, hi);
    }
    (step.went_down ? hi : lo) = mid;
  }
  point.qc = 0.5 * (lo + hi);
  point.lo = std::min(lo, und_lo);
  point.hi = std::max(hi, und_hi);
  return point;
}

// q_c(p) on a box of Z^d-side L: the q where the surrogate fires with probability 1/2.
inline CurvePoint estimate_qc_bisect(LatticeSpec spec, double p, int L, const BisectOptions& opt) {
  if (!(p >= 0.0 && p < 1.0)) throw DomainError("estimate_qc_bisect: requires 0 <= p < 1");
  spec.side_d = L;
  auto lattice = std::make_shared<const Lattice>(spec);
  if (opt.axis < 0 || opt.axis >= lattice->dims()) throw SpecError("estimate_qc_bisect: axis out of range");
  auto hits = [&](double q, std::uint64_t n, std::uint32_t experiment) {
    SampleOptions so = opt.sampling;
    so.experiment = experiment;
    return reduce_samples<std::uint64_t>(lattice, p, q, n, so, [&](const Configuration& c) {
      return static_cast<std::uint64_t>(surrogate_fires(c, opt.surrogate, opt.axis));
    });
  };
  CurvePoint point = bisect_crossing(hits, opt);
  point.p = p;
  point.L = L;
  return point;
}

// ---------------------------------------------------------------------------
// Crossover exponent: weighted least squares of log q_c on log |p - p_c|.

struct ExponentFit {
  double slope = 0.0;      // psi-hat
  double intercept = 0.0;  // log C
  double cov[2][2] = {{0, 0}, {0, 0}};  // (slope, intercept)
  double chi2 = 0.0;
  std::vector<double> p;           // p values used
  std::vector<double> x;           // log |p - p_c|
  std::vector<double> y;           // log q_c
  std::vector<double> sigma;       // delta-method sd of log q_c (0: unknown)
  std::vector<double> residuals;   // y - (intercept + slope x)
  std::vector<double> log_ratio;   // log q_c / log |p - p_c|
  std::size_t rejected = 0;        // points dropped (CI touching 0, p >= p_c, ...)

  double slope_se() const { return std::sqrt(cov[0][0]); }
};

inline ExponentFit fit_crossover_exponent(const std::vector<CurvePoint>& points, double p_c, double level = 0.95) {
  ExponentFit fit;
  const double z = normal_quantile(level);
  for (const auto& pt : points) {
    const bool usable = pt.p < p_c && pt.qc > 0.0 && pt.lo > 0.0 &&
                        std::find(fit.p.begin(), fit.p.end(), pt.p) == fit.p.end();
    if (!usable) {
      ++fit.rejected;
      continue;
    }
    fit.p.push_back(pt.p);
    fit.x.push_back(std::log(p_c - pt.p));
    fit.y.push_back(std::log(pt.qc));
    fit.sigma.push_back((pt.hi - pt.lo) / (2.0 * z * pt.qc));
  }
  const std::size_t n = fit.x.size();
  if (n < 3) throw DomainError("fit_crossover_exponent: fewer than 3 usable points");

  const bool weighted = std::all_of(fit.sigma.begin(), fit.sigma.end(), [](double s) { return s > 0.0; });
  std::vector<double> w(n, 1.0);
  if (weighted)
    for (std::size_t i = 0; i < n; ++i) w[i] = 1.0 / (fit.sigma[i] * fit.sigma[i]);

  double sw = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sw += w[i];
    sx += w[i] * fit.x[i];
    sy += w[i] * fit.y[i];
  }
  const double xbar = sx / sw, ybar = sy / sw;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += w[i] * (fit.x[i] - xbar) * (fit.x[i] - xbar);
    sxy += w[i] * (fit.x[i] - xbar) * (fit.y[i] - ybar);
  }
  if (sxx <= 0) throw DomainError("fit_crossover_exponent: p values are degenerate");
  fit.slope = sxy / sxx;
  fit.intercept = ybar - fit.slope * xbar;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = fit.y[i] - (fit.intercept + fit.slope * fit.x[i]);
    fit.residuals.push_back(r);
    fit.chi2 += w[i] * r * r;
    fit.log_ratio.push_back(fit.y[i] / fit.x[i]);
  }
  // Known sigmas: scale by the Birge ratio when it exceeds 1; unit weights: by s^2.
  const double dof = static_cast<double>(n) - 2.0;
  const double scale = weighted ? std::max(1.0, dof > 0 ? fit.chi2 / dof : 1.0) : (dof > 0 ? fit.chi2 / dof : 0.0);
  fit.cov[0][0] = scale / sxx;
  fit.cov[1][1] = scale * (1.0 / sw + xbar * xbar / sxx);
  fit.cov[0][1] = fit.cov[1][0] = -scale * xbar / sxx;
  return fit;
}

// ---------------------------------------------------------------------------

struct BoundReport {
  double p = 0.0;
  double p_c = 0.0;
  Threshold threshold;
  double bound = 1.0;   // min(8 d^2 (p_c - p), 1)
  double qc_hi = 0.0;
  double ratio = 0.0;   // q_c / (p_c - p)
  bool holds = false;
};

inline BoundReport bound_check(const CurvePoint& point, int d, double p_c) {
  BoundReport rep;
  rep.p = point.p;
  rep.p_c = p_c;
  rep.threshold = theorem_threshold(d, point.p, p_c);
  rep.bound = rep.threshold.value;
  rep.qc_hi = point.hi;
  rep.ratio = point.qc / (p_c - point.p);
  rep.holds = rep.threshold.vacuous || point.hi <= rep.bound;
  return rep;
}

// ---------------------------------------------------------------------------

struct DiagnosticRow {
  double p = 0.0;
  CurvePoint curve;
  ChiEstimate chi;           // chi_p on Z^d alone (s = 0 box)
  double product = 0.0;      // q_c * chi_p
  double chi_exact = std::nan("");  // (1+p)/(1-p) when d = 1
};

struct Diagnostic {
  std::vector<DiagnosticRow> rows;
  double product_min = 0.0;
  double product_max = 0.0;
};

// Tabulates q_c(p) * chi_p(d) over a grid; exploratory, no pass/fail.
inline Diagnostic conjecture_diagnostic(const std::vector<double>& p_grid, const LatticeSpec& spec, int L,
                                        std::uint64_t n_chi, const BisectOptions& opt) {
  Diagnostic diag;
  LatticeSpec zd = LatticeSpec::nearest(spec.d, 0, L, 2, Boundary::periodic);
  auto zd_lattice = std::make_shared<const Lattice>(zd);
  diag.product_min = std::numeric_limits<double>::infinity();
  diag.product_max = -std::numeric_limits<double>::infinity();
  std::uint32_t experiment = 1u << 20;
  for (double p : p_grid) {
    DiagnosticRow row;
    row.p = p;
    row.curve = estimate_qc_bisect(spec, p, L, opt);
    SampleOptions so = opt.sampling;
    so.experiment = experiment++;
    row.chi = estimate_chi(zd_lattice, p, 0.0, n_chi, so);
    row.product = row.curve.qc * row.chi.estimate.value;
    if (spec.d == 1) row.chi_exact = (1.0 + p) / (1.0 - p);
    diag.product_min = std::min(diag.product_min, row.product);
    diag.product_max = std::max(diag.product_max, row.product);
    diag.rows.push_back(std::move(row));
  }
  if (diag.rows.empty()) diag.product_min = diag.product_max = 0.0;
  return diag;
}

}  // namespace anisoperc
