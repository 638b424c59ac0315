#pragma once

// Subcommand drivers. Each run_* reads a resolved Manifest, writes CSV tables
// with JSONL mirrors plus manifest.json into the output directory, and returns
// the process exit code. Files depend only on the manifest (never on the
// worker count, the output path or the clock); timing goes to the log stream.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "anisoperc/clusters.hpp"
#include "anisoperc/coupling.hpp"
#include "anisoperc/estimators.hpp"
#include "anisoperc/io.hpp"
#include "anisoperc/lattice.hpp"
#include "anisoperc/manifest.hpp"
#include "anisoperc/parallel.hpp"
#include "anisoperc/sampling.hpp"

namespace anisoperc::cli {

enum ExitCode : int { ok = 0, check_failed = 1, usage_error = 2 };

inline constexpr const char* kOutEnv = "ANISOPERC_OUT";
inline constexpr const char* kDefaultOut = "anisoperc-out";

struct Context {
  Manifest manifest;
  std::filesystem::path out;
  unsigned workers = 1;
  bool trace = false;
  std::ostream* log = &std::cerr;
};

// --out, then output.dir, then $ANISOPERC_OUT, then ./anisoperc-out.
inline std::filesystem::path resolve_out(const std::string& flag, const Manifest& m) {
  if (!flag.empty()) return flag;
  if (!m.out_dir.empty()) return m.out_dir;
  if (const char* env = std::getenv(kOutEnv); env && *env) return env;
  return kDefaultOut;
}

// Per-subcommand defaults, applied beneath the manifest file.
inline Manifest default_manifest(const std::string& command) {
  Manifest m;
  if (command == "explore") {
    m.lattice = LatticeSpec::nearest(2, 1, 64, 2, Boundary::free);
    m.replicas = 1000;
  } else if (command == "equivalence") {
    m.lattice = LatticeSpec::nearest(1, 1, 2, 2, Boundary::free);
    m.p_grid = {0.5};
    m.q_grid = {0.3};
  } else if (command == "sample") {
    m.replicas = 10;
  }
  return m;
}

namespace detail {

class Timer {
public:
  explicit Timer(std::ostream& log, std::string what) : log_(log), what_(std::move(what)) {}
  ~Timer() {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    log_ << "[" << what_ << "] " << s << " s\n";
  }

private:
  std::ostream& log_;
  std::string what_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline void finish(const Context& ctx, ojson& row) {
  row["schema_version"] = kSchemaVersion;
  row["manifest_hash"] = manifest_hash(ctx.manifest);
}

inline std::vector<std::string> with_provenance(std::vector<std::string> header) {
  header.push_back("schema_version");
  header.push_back("manifest_hash");
  return header;
}

inline void write_manifest(const Context& ctx) {
  write_text(ctx.out / "manifest.json", manifest_to_json(ctx.manifest).dump(2) + "\n");
}

inline ojson coords_json(const ZdBox& box, std::uint32_t u) {
  ojson a = ojson::array();
  for (int x : box.coords(u)) a.push_back(x);
  return a;
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline int run_sample(const Context& ctx) {
  detail::Timer timer(*ctx.log, "sample");
  const Manifest& m = ctx.manifest;
  auto lattice = std::make_shared<const Lattice>(m.lattice);
  const int D = lattice->dims();
  std::vector<std::string> header{"grid_index", "p", "q", "replica", "origin_size", "max_size", "components",
                                  "open_edges"};
  for (int a = 0; a < D; ++a) header.push_back("span_" + std::to_string(a));
  header.push_back("seed");
  header.push_back("stream");
  Table table(detail::with_provenance(header));

  struct Point {
    double p, q;
  };
  std::vector<Point> grid;
  for (double p : m.p_grid)
    for (double q : m.q_grid) grid.push_back({p, q});
  const std::size_t n = m.replicas;
  const auto stats = parallel_map(grid.size() * n, ctx.workers, [&](std::size_t k) {
    const auto g = static_cast<std::uint32_t>(k / n), i = static_cast<std::uint32_t>(k % n);
    const Configuration c = sample_configuration(lattice, grid[g].p, grid[g].q, m.seed, SeedPlan::substream(g, i));
    return std::make_pair(cluster_stats(c), c.open_count());
  });
  for (std::size_t k = 0; k < stats.size(); ++k) {
    const auto g = static_cast<std::uint32_t>(k / n), i = static_cast<std::uint32_t>(k % n);
    const auto& [st, open] = stats[k];
    ojson row;
    row["grid_index"] = g;
    row["p"] = grid[g].p;
    row["q"] = grid[g].q;
    row["replica"] = i;
    row["origin_size"] = st.origin_size;
    row["max_size"] = st.max_size;
    row["components"] = st.components;
    row["open_edges"] = open;
    for (int a = 0; a < D; ++a) row["span_" + std::to_string(a)] = static_cast<bool>(st.spans[a]);
    row["seed"] = m.seed;
    row["stream"] = SeedPlan::substream(g, i);
    detail::finish(ctx, row);
    table.add(std::move(row));
  }
  write_table(ctx.out, "sample", table);
  detail::write_manifest(ctx);
  return ok;
}

// ---------------------------------------------------------------------------

inline int run_explore(const Context& ctx) {
  detail::Timer timer(*ctx.log, "explore");
  const Manifest& m = ctx.manifest;
  if (m.lattice.s != 1) throw UnsupportedVariant("explore requires s = 1 (the coupling lives on Z^d x Z)");

  Table runs(detail::with_provenance({"grid_index", "p", "q", "run", "outcome", "steps", "eta_ones", "eta_zeros",
                                      "cluster_size", "max_height", "probes", "trace_ok", "failed_checks", "seed"}));
  Table summary(detail::with_provenance({"grid_index", "p", "q", "qbar", "r", "runs", "died", "reached_boundary",
                                         "budget_exhausted", "window_exhausted", "eta_ones", "eta_steps",
                                         "eta_frequency", "first_eta_ones", "first_eta_frequency", "first_eta_z",
                                         "violations", "seed"}));
  std::string trace_lines;
  std::uint64_t violations_total = 0;

  CouplingOptions options;
  options.step_budget = m.step_budget;
  options.window = m.window;
  options.check_every = m.check_every;
  options.record_trace = true;

  std::uint32_t g = 0;
  for (double p : m.p_grid) {
    for (double q : m.q_grid) {
      const Coupling coupling(m.lattice, p, q, options);
      struct RunResult {
        CouplingState state;
        std::vector<std::string> failed;
        int first_eta = -1;  // eta(f_1), -1 when no step was taken
        std::size_t probes = 0;
      };
      const auto results = parallel_map(m.replicas, ctx.workers, [&](std::size_t i) {
        RunResult res;
        res.state = coupling.explore(m.seed, static_cast<std::uint32_t>(i));
        const TraceReport rep = coupling.verify_trace(res.state);
        for (const auto& c : rep.checks)
          if (!c.passed) res.failed.push_back(c.name + ": " + c.detail);
        if (!res.state.trace.empty()) res.first_eta = res.state.trace.front().eta;
        res.probes = res.state.probes.size();
        if (i >= m.trace_runs) {
          res.state.trace.clear();
          res.state.probes.clear();
        }
        return res;
      });

      std::uint64_t counts[4] = {0, 0, 0, 0}, ones = 0, steps = 0, first_ones = 0, first_n = 0, violations = 0;
      for (std::size_t i = 0; i < results.size(); ++i) {
        const CouplingState& st = results[i].state;
        ++counts[static_cast<int>(st.outcome)];
        ones += st.A.size();
        steps += st.step;
        if (results[i].first_eta >= 0) {
          ++first_n;
          first_ones += static_cast<std::uint64_t>(results[i].first_eta);
        }
        violations += results[i].failed.empty() ? 0 : 1;
        std::string failed;
        for (const auto& f : results[i].failed) failed += (failed.empty() ? "" : "; ") + f;

        ojson row;
        row["grid_index"] = g;
        row["p"] = p;
        row["q"] = q;
        row["run"] = i;
        row["outcome"] = to_string(st.outcome);
        row["steps"] = st.step;
        row["eta_ones"] = st.A.size();
        row["eta_zeros"] = st.B.size();
        row["cluster_size"] = st.S.size();
        row["max_height"] = st.max_height;
        row["probes"] = results[i].probes;
        row["trace_ok"] = results[i].failed.empty();
        row["failed_checks"] = failed;
        row["seed"] = m.seed;
        detail::finish(ctx, row);
        runs.add(std::move(row));

        if (ctx.trace && i < m.trace_runs) {
          for (const auto& rec : st.trace) {
            ojson t;
            t["grid_index"] = g;
            t["run"] = i;
            t["step"] = rec.step;
            t["f_n"] = rec.edge;
            t["from"] = detail::coords_json(coupling.box(), rec.from);
            t["to"] = detail::coords_json(coupling.box(), rec.to);
            t["v"] = rec.v;
            t["level"] = rec.level;
            t["condition"] = to_string(rec.condition);
            t["eta"] = rec.eta;
            if (rec.eta) {
              ojson added = detail::coords_json(coupling.box(), rec.to);
              added.push_back(rec.added_t);
              t["s_delta"] = added;
            } else {
              t["s_delta"] = nullptr;
            }
            trace_lines += t.dump() + "\n";
          }
        }
      }
      violations_total += violations;
      const Estimate first = proportion_estimate(first_ones, first_n, m.level);
      const double r = coupling.r();
      const double se_r = first_n ? std::sqrt(r * (1 - r) / first_n) : 0.0;
      ojson row;
      row["grid_index"] = g;
      row["p"] = p;
      row["q"] = q;
      row["qbar"] = coupling.qbar();
      row["r"] = r;
      row["runs"] = m.replicas;
      row["died"] = counts[0];
      row["reached_boundary"] = counts[1];
      row["budget_exhausted"] = counts[2];
      row["window_exhausted"] = counts[3];
      row["eta_ones"] = ones;
      row["eta_steps"] = steps;
      row["eta_frequency"] = num(steps ? static_cast<double>(ones) / steps : std::nan(""));
      row["first_eta_ones"] = first_ones;
      row["first_eta_frequency"] = num(first_n ? first.value : std::nan(""));
      row["first_eta_z"] = num(se_r > 0 ? (first.value - r) / se_r : std::nan(""));
      row["violations"] = violations;
      row["seed"] = m.seed;
      detail::finish(ctx, row);
      summary.add(std::move(row));
      ++g;
    }
  }
  write_table(ctx.out, "explore", runs);
  write_table(ctx.out, "explore_summary", summary);
  if (ctx.trace) write_text(ctx.out / "explore_trace.jsonl", trace_lines);
  detail::write_manifest(ctx);
  if (violations_total) *ctx.log << "explore: " << violations_total << " runs failed verify_trace\n";
  return violations_total ? check_failed : ok;
}

// ---------------------------------------------------------------------------

inline BisectOptions bisect_options(const Manifest& m, unsigned workers) {
  BisectOptions opt;
  opt.n_per_probe = m.n_per_probe;
  opt.max_factor = m.max_factor;
  opt.tol = m.tol;
  opt.surrogate = m.surrogate;
  opt.axis = m.axis;
  opt.sampling.seed = m.seed;
  opt.sampling.workers = workers;
  opt.sampling.level = m.level;
  return opt;
}

inline std::vector<std::string> curve_header() {
  return detail::with_provenance({"p", "pc_minus_p", "qc", "qc_lo", "qc_hi", "bound_line", "L", "samples", "flag",
                                  "bound_holds", "ratio", "p_c", "seed"});
}

inline int run_qc_scan(const Context& ctx) {
  detail::Timer timer(*ctx.log, "qc-scan");
  const Manifest& m = ctx.manifest;
  const double p_c = m.resolved_pc();
  const BisectOptions opt = bisect_options(m, ctx.workers);

  Table curve(curve_header());
  std::string trace_lines;
  bool violated = false;
  for (int L : m.resolved_sizes()) {
    for (double p : m.p_grid) {
      const CurvePoint pt = estimate_qc_bisect(m.lattice, p, L, opt);
      std::string flag = pt.flag;
      double bound_line = std::nan("");
      ojson holds = nullptr;
      if (p < p_c) {
        const BoundReport rep = bound_check(pt, m.lattice.d, p_c);
        bound_line = rep.bound;
        holds = rep.holds;
        if (!rep.holds) violated = true;
      } else {
        flag = flag.empty() ? "p_ge_pc" : "p_ge_pc;" + flag;
      }
      ojson row;
      row["p"] = p;
      row["pc_minus_p"] = p_c - p;
      row["qc"] = pt.qc;
      row["qc_lo"] = pt.lo;
      row["qc_hi"] = pt.hi;
      row["bound_line"] = num(bound_line);
      row["L"] = L;
      row["samples"] = pt.samples;
      row["flag"] = flag;
      row["bound_holds"] = holds;
      row["ratio"] = num(p < p_c ? pt.qc / (p_c - p) : std::nan(""));
      row["p_c"] = p_c;
      row["seed"] = m.seed;
      detail::finish(ctx, row);
      curve.add(std::move(row));
      for (const auto& s : pt.trace) {
        ojson t;
        t["p"] = p;
        t["L"] = L;
        t["bracket_lo"] = s.bracket_lo;
        t["bracket_hi"] = s.bracket_hi;
        t["q"] = s.q;
        t["n"] = s.n;
        t["hits"] = s.hits;
        t["ci_lo"] = s.ci_lo;
        t["ci_hi"] = s.ci_hi;
        t["forced"] = s.forced;
        t["went_down"] = s.went_down;
        trace_lines += t.dump() + "\n";
      }
      *ctx.log << "qc-scan: L=" << L << " p=" << p << " qc=" << pt.qc << " [" << pt.lo << ", " << pt.hi << "]\n";
    }
  }
  write_table(ctx.out, "curve", curve);
  write_text(ctx.out / "curve_trace.jsonl", trace_lines);

  if (m.chi_samples > 0) {
    Table diag(detail::with_provenance({"p", "L", "qc", "chi", "chi_lo", "chi_hi", "chi_truncated", "product",
                                        "chi_exact"}));
    std::vector<double> grid;
    for (double p : m.p_grid)
      if (p < p_c) grid.push_back(p);
    for (int L : m.resolved_sizes()) {
      const Diagnostic dg = conjecture_diagnostic(grid, m.lattice, L, m.chi_samples, opt);
      for (const auto& r : dg.rows) {
        ojson row;
        row["p"] = r.p;
        row["L"] = L;
        row["qc"] = r.curve.qc;
        row["chi"] = r.chi.estimate.value;
        row["chi_lo"] = r.chi.estimate.lo;
        row["chi_hi"] = r.chi.estimate.hi;
        row["chi_truncated"] = r.chi.truncated;
        row["product"] = r.product;
        row["chi_exact"] = num(r.chi_exact);
        detail::finish(ctx, row);
        diag.add(std::move(row));
      }
    }
    write_table(ctx.out, "diagnostic", diag);
  }
  detail::write_manifest(ctx);
  return violated ? check_failed : ok;
}

// ---------------------------------------------------------------------------

// Reads p, qc, qc_lo, qc_hi (and L when present) from a curve CSV.
inline std::vector<CurvePoint> read_curve(const std::filesystem::path& path) {
  const CsvData data = parse_csv(read_text(path));
  const int cp = data.column("p"), cq = data.column("qc"), clo = data.column("qc_lo"), chi = data.column("qc_hi"),
            cl = data.column("L");
  if (cp < 0 || cq < 0) throw SpecError("curve CSV '" + path.string() + "' needs columns p and qc");
  std::vector<CurvePoint> points;
  for (std::size_t i = 0; i < data.rows.size(); ++i) {
    const auto& row = data.rows[i];
    if (row.size() != data.header.size())
      throw SpecError("curve CSV '" + path.string() + "' row " + std::to_string(i + 1) + " has the wrong width");
    CurvePoint pt;
    pt.p = parse_double(row[cp]);
    pt.qc = parse_double(row[cq]);
    pt.lo = clo >= 0 ? parse_double(row[clo]) : pt.qc;
    pt.hi = chi >= 0 ? parse_double(row[chi]) : pt.qc;
    pt.L = cl >= 0 ? static_cast<int>(parse_double(row[cl])) : 0;
    points.push_back(pt);
  }
  return points;
}

inline int run_fit(const Context& ctx, const std::string& curve_path = {}) {
  detail::Timer timer(*ctx.log, "fit");
  const Manifest& m = ctx.manifest;
  const std::string input = curve_path.empty() ? m.fit_input : curve_path;
  if (input.empty()) throw SpecError("fit: no input curve (use --curve PATH or fit.input)");
  const double p_c = m.resolved_pc();
  const auto points = read_curve(input);
  const ExponentFit fit = fit_crossover_exponent(points, p_c, m.level);

  Table summary(detail::with_provenance({"psi", "psi_se", "intercept", "intercept_se", "cov_slope_intercept",
                                         "chi2", "points", "rejected", "p_c", "weighted"}));
  ojson row;
  row["psi"] = fit.slope;
  row["psi_se"] = num(fit.slope_se());
  row["intercept"] = fit.intercept;
  row["intercept_se"] = num(std::sqrt(fit.cov[1][1]));
  row["cov_slope_intercept"] = num(fit.cov[0][1]);
  row["chi2"] = fit.chi2;
  row["points"] = fit.x.size();
  row["rejected"] = fit.rejected;
  row["p_c"] = p_c;
  row["weighted"] = std::all_of(fit.sigma.begin(), fit.sigma.end(), [](double s) { return s > 0; });
  detail::finish(ctx, row);
  summary.add(std::move(row));

  Table residuals(detail::with_provenance({"p", "log_pc_minus_p", "log_qc", "sigma_log_qc", "residual", "log_ratio"}));
  for (std::size_t i = 0; i < fit.x.size(); ++i) {
    ojson r;
    r["p"] = fit.p[i];
    r["log_pc_minus_p"] = fit.x[i];
    r["log_qc"] = fit.y[i];
    r["sigma_log_qc"] = fit.sigma[i];
    r["residual"] = fit.residuals[i];
    r["log_ratio"] = fit.log_ratio[i];
    detail::finish(ctx, r);
    residuals.add(std::move(r));
  }
  write_table(ctx.out, "fit", summary);
  write_table(ctx.out, "fit_residuals", residuals);
  detail::write_manifest(ctx);
  *ctx.log << "fit: psi = " << fit.slope << " +- " << fit.slope_se() << " from " << fit.x.size() << " points\n";
  return ok;
}

// ---------------------------------------------------------------------------

struct CheckItem {
  std::string item;
  int d = 0;
  double value = 0.0;
  double expected = 0.0;
  bool passed = false;
  std::string detail;
};

// Zero-RNG arithmetic suite over effective parameters and the domination chain.
inline std::vector<CheckItem> arithmetic_checks(const std::map<int, double>& pc_override = {},
                                                std::uint64_t grid = 1000) {
  std::vector<CheckItem> items;
  auto close = [&](std::string name, double value, double expected, double tol, std::string detail = {}) {
    items.push_back({std::move(name), 0, value, expected, std::abs(value - expected) <= tol, std::move(detail)});
  };

  for (int mm : {2, 4, 6, 8, 12}) {
    double worst = 0.0;
    for (int i = 0; i <= 100; ++i) {
      const double q = i / 100.0;
      const double qbar = effective_qbar(q, mm);
      worst = std::max(worst, std::abs(1.0 - std::pow(1.0 - qbar, mm) - q));
    }
    items.push_back({"qbar_roundtrip_m" + std::to_string(mm), 0, worst, 0.0, worst <= 1e-12,
                     "max |1-(1-qbar)^m - q| over q in {0,0.01,...,1}"});
  }
  close("qbar_q0.19_m2", effective_qbar(0.19, 2), 0.1, 1e-12);
  close("qbar_q0_m4", effective_qbar(0.0, 4), 0.0, 0.0);
  close("qbar_q1_m4", effective_qbar(1.0, 4), 1.0, 0.0);
  close("r_p0.5_qbar0.5", effective_r(0.5, 0.5), 0.625, 1e-15);
  close("r_d2_p0.45_q0.2", effective_r(0.45, effective_qbar(0.2, 4)), 0.463430, 1e-5, "quoted value is rounded");
  close("r_d2_p0.49_q0.32", effective_r(0.49, effective_qbar(0.32, 4)), 0.512970, 1e-5, "quoted value is rounded");
  close("threshold_d2_p0.49", theorem_threshold(2, 0.49, 0.5).value, 0.32, 1e-12);
  {
    const Threshold t = theorem_threshold(2, 0.45, 0.5);
    items.push_back({"threshold_d2_p0.45_vacuous", 2, t.raw, 1.6, t.vacuous && std::abs(t.raw - 1.6) < 1e-12,
                     "8 d^2 (p_c - p) = 1.6 > 1"});
  }
  {
    const DominationChain c = verify_domination_chain(3, 0.3, 0.0, *literature_pc(3));
    items.push_back({"chain_d3_p0.3_q0_fails", 3, c.r, 0.3, !c.holds && c.r == 0.3, "q = 0 adds nothing"});
  }

  for (int d = 2; d <= 8; ++d) {
    CheckItem item;
    item.item = "domination_chain";
    item.d = d;
    const auto it = pc_override.find(d);
    const double p_c = it != pc_override.end() ? it->second : *literature_pc(d);
    item.expected = p_c;
    if (!(p_c > 1.0 / (2 * d) && p_c <= 1.0)) {
      item.passed = false;
      item.detail = "p_c = " + format_double(p_c) + " outside (1/(2d), 1]";
      items.push_back(item);
      continue;
    }
    // p on a grid in (max(1/(2d), p_c - 1/(8d^2)), p_c), q = 8 d^2 (p_c - p).
    const double delta = std::min(1.0 / (8.0 * d * d), p_c - 1.0 / (2.0 * d));
    std::uint64_t failures = 0;
    double min_margin = INFINITY;
    std::string first;
    for (std::uint64_t i = 1; i <= grid; ++i) {
      const double p = p_c - delta * static_cast<double>(i) / static_cast<double>(grid + 1);
      const double q = std::min(1.0, 8.0 * d * d * (p_c - p));
      const DominationChain c = verify_domination_chain(d, p, q, p_c);
      min_margin = std::min(min_margin, c.r - p_c);
      if (!c.holds || !c.in_window) {
        if (!failures)
          first = "p=" + format_double(p) + " q=" + format_double(q) + " r=" + format_double(c.r) +
                  (c.strict_ok ? "" : " r<=p+q/(8d^2)") + (c.reaches_pc ? "" : " r<p_c");
        ++failures;
      }
    }
    item.value = min_margin;
    item.passed = failures == 0;
    item.detail = failures ? std::to_string(failures) + " failures; first " + first
                           : "min(r - p_c) over " + std::to_string(grid) + " points";
    items.push_back(item);
  }
  return items;
}

inline int run_checks(const Context& ctx) {
  detail::Timer timer(*ctx.log, "check");
  const auto items = arithmetic_checks(ctx.manifest.check_pc, ctx.manifest.check_grid);
  Table table(detail::with_provenance({"item", "d", "value", "expected", "passed", "detail"}));
  bool all = true;
  for (const auto& it : items) {
    ojson row;
    row["item"] = it.item;
    row["d"] = it.d;
    row["value"] = num(it.value);
    row["expected"] = num(it.expected);
    row["passed"] = it.passed;
    row["detail"] = it.detail;
    detail::finish(ctx, row);
    table.add(std::move(row));
    if (!it.passed) {
      all = false;
      *ctx.log << "FAIL " << it.item << (it.d ? " d=" + std::to_string(it.d) : "") << ": " << it.detail << "\n";
    }
  }
  write_table(ctx.out, "check", table);
  detail::write_manifest(ctx);
  *ctx.log << "check: " << items.size() << " items, " << (all ? "all passed" : "FAILURES") << "\n";
  return all ? ok : check_failed;
}

// ---------------------------------------------------------------------------

inline int run_equivalence(const Context& ctx) {
  detail::Timer timer(*ctx.log, "equivalence");
  const Manifest& m = ctx.manifest;
  Table hist(detail::with_provenance({"grid_index", "p", "q", "size", "reference", "count", "empirical"}));
  Table summary(detail::with_provenance({"grid_index", "p", "q", "exact", "samples", "tv", "noise_floor", "chi2",
                                         "dof", "chi2_pvalue", "tv_tol", "passed", "seed"}));
  bool all = true;
  std::uint32_t g = 0;
  for (double p : m.p_grid) {
    for (double q : m.q_grid) {
      const EquivalenceReport rep =
          equivalence_check(m.lattice, p, q, m.eq_samples, m.seed + g, ctx.workers, m.exact_edge_limit);
      for (std::size_t k = 1; k < rep.reference.size(); ++k) {
        ojson row;
        row["grid_index"] = g;
        row["p"] = p;
        row["q"] = q;
        row["size"] = k;
        row["reference"] = rep.reference[k];
        row["count"] = rep.counts[k];
        row["empirical"] = static_cast<double>(rep.counts[k]) / static_cast<double>(std::max<std::uint64_t>(rep.samples, 1));
        detail::finish(ctx, row);
        hist.add(std::move(row));
      }
      const bool passed = rep.tv < m.tv_tol;
      all = all && passed;
      ojson row;
      row["grid_index"] = g;
      row["p"] = p;
      row["q"] = q;
      row["exact"] = rep.exact;
      row["samples"] = rep.samples;
      row["tv"] = rep.tv;
      row["noise_floor"] = rep.noise_floor;
      row["chi2"] = rep.chi2;
      row["dof"] = rep.dof;
      row["chi2_pvalue"] = rep.chi2_pvalue;
      row["tv_tol"] = m.tv_tol;
      row["passed"] = passed;
      row["seed"] = m.seed + g;
      detail::finish(ctx, row);
      summary.add(std::move(row));
      *ctx.log << "equivalence: p=" << p << " q=" << q << " TV=" << rep.tv << " (noise floor " << rep.noise_floor
               << ")\n";
      ++g;
    }
  }
  write_table(ctx.out, "equivalence", hist);
  write_table(ctx.out, "equivalence_summary", summary);
  detail::write_manifest(ctx);
  return all ? ok : check_failed;
}

}  // namespace anisoperc::cli
