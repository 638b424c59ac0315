#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "anisoperc/error.hpp"
#include "anisoperc/lattice.hpp"
#include "anisoperc/rng.hpp"

namespace anisoperc {

// Per-parallel-edge probability qbar with (1 - q) = (1 - qbar)^m.
// Stable for small q: qbar = -expm1(log1p(-q) / m).
inline double effective_qbar(double q, int m) {
  if (m < 1) throw DomainError("effective_qbar: m must be >= 1");
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("effective_qbar: q must lie in [0,1]");
  if (q == 0.0) return 0.0;
  if (q == 1.0) return 1.0;
  return -std::expm1(std::log1p(-q) / m);
}

// Edge parameter of the Z^d process dominated by the coupling.
inline double effective_r(double p, double qbar) {
  if (!(p >= 0.0 && p <= 1.0) || !(qbar >= 0.0 && qbar <= 1.0))
    throw DomainError("effective_r: arguments must lie in [0,1]");
  return p + qbar * p * (1.0 - p);
}

struct Params {
  double p = 0.0;
  double q = 0.0;
  int m = 1;          // number of parallel vertical edges (|U| in multigraph mode)
  double qbar = 0.0;  // derived
  double r = 0.0;     // derived

  static Params make(double p, double q, int m = 1) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("p must lie in [0,1]");
    if (!(q >= 0.0 && q <= 1.0)) throw DomainError("q must lie in [0,1]");
    Params out;
    out.p = p;
    out.q = q;
    out.m = m;
    out.qbar = effective_qbar(q, m);
    out.r = effective_r(p, out.qbar);
    return out;
  }

  // Params for the nearest-neighbour multigraph over Z^d (m = 2d).
  static Params for_dimension(double p, double q, int d) { return make(p, q, 2 * d); }
};

struct Threshold {
  double value = 0.0;  // min(8 d^2 (p_c - p), 1)
  double raw = 0.0;    // 8 d^2 (p_c - p)
  bool vacuous = false;
};

// Sufficient q for percolation: 8 d^2 (p_c - p), flagged vacuous above 1.
inline Threshold theorem_threshold(int d, double p, double p_c) {
  if (d < 1) throw DomainError("theorem_threshold: d must be >= 1");
  if (!(p_c > 0.0 && p_c <= 1.0)) throw DomainError("theorem_threshold: p_c must lie in (0,1]");
  if (!(p >= 0.0)) throw DomainError("theorem_threshold: p must be >= 0");
  if (p >= p_c) throw DomainError("theorem_threshold: requires p < p_c");
  Threshold t;
  t.raw = 8.0 * d * d * (p_c - p);
  t.vacuous = t.raw > 1.0;
  t.value = t.vacuous ? 1.0 : t.raw;
  return t;
}

struct DominationChain {
  int d = 0;
  double p = 0.0;
  double q = 0.0;
  double p_c = 0.0;
  double qbar = 0.0;         // 1 - (1-q)^{1/2d}
  double r = 0.0;            // p + qbar p (1-p)
  double lower_bound = 0.0;  // p + q / (8 d^2)
  bool in_window = false;    // p in (1/(2d), p_c)
  bool strict_ok = false;    // r > lower_bound
  bool reaches_pc = false;   // r >= p_c
  bool holds = false;        // strict_ok && reaches_pc
  std::string note;
};

inline DominationChain verify_domination_chain(int d, double p, double q, double p_c) {
  DominationChain c;
  c.d = d;
  c.p = p;
  c.q = q;
  c.p_c = p_c;
  c.qbar = effective_qbar(q, 2 * d);
  c.r = effective_r(p, c.qbar);
  c.lower_bound = p + q / (8.0 * d * d);
  c.in_window = p > 1.0 / (2.0 * d) && p < p_c;
  c.strict_ok = c.r > c.lower_bound;
  c.reaches_pc = c.r >= p_c;
  c.holds = c.strict_ok && c.reaches_pc;
  if (!c.in_window) c.note = "outside theorem window";
  return c;
}

// One sampled omega: an open/closed bit per edge of the lattice.
class Configuration {
public:
  Configuration(std::shared_ptr<const Lattice> lattice, Params params, std::uint64_t seed,
                std::uint64_t stream)
      : lattice_(std::move(lattice)),
        params_(params),
        seed_(seed),
        stream_(stream),
        bits_((lattice_->num_edges() + 63) / 64, 0) {}

  const Lattice& lattice() const { return *lattice_; }
  std::shared_ptr<const Lattice> lattice_ptr() const { return lattice_; }
  const Params& params() const { return params_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  std::size_t size() const { return lattice_->num_edges(); }
  bool open(std::size_t e) const { return (bits_[e >> 6] >> (e & 63)) & 1u; }
  void set(std::size_t e, bool value) {
    const std::uint64_t mask = std::uint64_t{1} << (e & 63);
    bits_[e >> 6] = value ? (bits_[e >> 6] | mask) : (bits_[e >> 6] & ~mask);
  }
  std::size_t open_count() const {
    std::size_t n = 0;
    for (auto w : bits_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }
  const std::vector<std::uint64_t>& words() const { return bits_; }

  bool operator==(const Configuration& o) const {
    return lattice_->spec() == o.lattice_->spec() && bits_ == o.bits_;
  }

private:
  std::shared_ptr<const Lattice> lattice_;
  Params params_;
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::vector<std::uint64_t> bits_;
};

namespace detail {

// Visit the 32-bit uniform attached to every edge of the lattice under (seed, stream).
template <typename Fn>
void for_each_edge_uniform(const Lattice& lattice, std::uint64_t seed, std::uint64_t stream, Fn&& fn) {
  const std::size_t n = lattice.num_edges();
  const auto lo = static_cast<std::uint32_t>(stream);
  const auto hi = static_cast<std::uint32_t>(stream >> 32);
  for (std::size_t block = 0; block * 4 < n; ++block) {
    const Counter u =
        philox4x32({static_cast<std::uint32_t>(block), lo, hi, tag(Domain::configuration)}, seed);
    const std::size_t base = block * 4;
    for (std::size_t k = 0; k < 4 && base + k < n; ++k) fn(base + k, u[k]);
  }
}

inline Params lattice_params(const Lattice& lattice, double p, double q) {
  return Params::make(p, q, static_cast<int>(lattice.parallel_count()));
}

}  // namespace detail

// Independent Bernoulli edges: Z^d-edges with p, Z^s-edges with q, or each
// parallel vertical copy with qbar in multigraph mode.
inline Configuration sample_configuration(std::shared_ptr<const Lattice> lattice, double p, double q,
                                          std::uint64_t seed, std::uint64_t stream) {
  const Params params = detail::lattice_params(*lattice, p, q);
  Configuration config(lattice, params, seed, stream);
  const std::uint64_t tp = bernoulli_threshold(params.p);
  const std::uint64_t tq = bernoulli_threshold(lattice->spec().multigraph ? params.qbar : params.q);
  const auto edges = lattice->edges();
  detail::for_each_edge_uniform(*lattice, seed, stream, [&](std::size_t e, std::uint32_t u) {
    if (bernoulli(u, edges[e].cls == EdgeClass::d_edge ? tp : tq)) config.set(e, true);
  });
  return config;
}

// Two configurations driven by the same uniforms; the first is a subset of the second.
inline std::pair<Configuration, Configuration> sample_monotone_pair(std::shared_ptr<const Lattice> lattice,
                                                                    double p1, double q1, double p2,
                                                                    double q2, std::uint64_t seed,
                                                                    std::uint64_t stream = 0) {
  if (!(p1 <= p2 && q1 <= q2))
    throw DomainError("sample_monotone_pair: parameters must be ordered coordinatewise");
  return {sample_configuration(lattice, p1, q1, seed, stream),
          sample_configuration(lattice, p2, q2, seed, stream)};
}

// Multigraph configuration -> plain configuration: a vertical edge is open iff
// at least one of its parallel copies is.
inline Configuration collapse_configuration(const Configuration& multi,
                                            std::shared_ptr<const Lattice> plain) {
  const Lattice& ml = multi.lattice();
  if (!ml.spec().multigraph) return multi;
  if (plain->spec() != collapse_multigraph(ml.spec()))
    throw SpecError("collapse_configuration: target lattice is not the collapsed multigraph");
  Configuration out(std::move(plain), Params::make(multi.params().p, multi.params().q, 1), multi.seed(),
                    multi.stream());
  for (std::size_t e = 0; e < ml.num_edges(); ++e) {
    if (multi.open(e)) out.set(ml.collapsed(e), true);
  }
  return out;
}

inline Configuration collapse_configuration(const Configuration& multi) {
  return collapse_configuration(multi,
                                std::make_shared<const Lattice>(collapse_multigraph(multi.lattice().spec())));
}

}  // namespace anisoperc
