#pragma once

// Finite boxes of Z^d x Z^s for anisotropic bond percolation.
//
// Vertices are linearised row-major with the Z^s block slowest:
//   index = t_lin * side_d^d + u_lin,   u_lin = ((u_0 * L + u_1) * L + ...) .
// The edge list is emitted in increasing base-vertex order and, per base
// vertex, Z^d directions before Z^s directions, so the Z^d-edges of layer
// t = 0 appear in the same (u, direction) lexicographic order that
// EdgeOrdering uses.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "anisoperc/error.hpp"

namespace anisoperc {

enum class Boundary : std::uint8_t { free, periodic };
enum class Variant : std::uint8_t { nearest_neighbor, layered, spread_out };
enum class RangeNorm : std::uint8_t { sup, l1 };
enum class EdgeClass : std::uint8_t { d_edge, s_edge };

using Coord = std::vector<int>;

struct LatticeSpec {
  int d = 2;
  int s = 1;
  int side_d = 16;
  int side_s = 16;
  Boundary boundary_d = Boundary::periodic;
  Boundary boundary_s = Boundary::periodic;
  Variant variant = Variant::nearest_neighbor;
  int range = 1;                    // spread_out only
  RangeNorm norm = RangeNorm::sup;  // spread_out only
  int layers = 1;                   // layered only: Z^d x {0, ..., layers}
  bool multigraph = false;          // vertical edges split into |U| parallel copies

  bool operator==(const LatticeSpec&) const = default;

  static LatticeSpec nearest(int d, int s, int side_d, int side_s,
                             Boundary boundary = Boundary::periodic) {
    LatticeSpec spec;
    spec.d = d;
    spec.s = s;
    spec.side_d = side_d;
    spec.side_s = side_s;
    spec.boundary_d = boundary;
    spec.boundary_s = boundary;
    return spec;
  }

  // Z^d x {0..l} with vertical arithmetic modulo l + 1 (l = 1 is the bilayer).
  static LatticeSpec layered(int d, int side_d, int l, Boundary boundary_d = Boundary::free) {
    LatticeSpec spec;
    spec.d = d;
    spec.s = 1;
    spec.side_d = side_d;
    spec.side_s = l + 1;
    spec.boundary_d = boundary_d;
    spec.boundary_s = Boundary::periodic;
    spec.variant = Variant::layered;
    spec.layers = l;
    return spec;
  }

  static LatticeSpec spread_out(int d, int s, int side_d, int side_s, int range,
                                Boundary boundary = Boundary::periodic,
                                RangeNorm norm = RangeNorm::sup) {
    LatticeSpec spec = nearest(d, s, side_d, side_s, boundary);
    spec.variant = Variant::spread_out;
    spec.range = range;
    spec.norm = norm;
    return spec;
  }

  // Largest coordinate difference of a Z^d-edge.
  int reach() const { return variant == Variant::spread_out ? range : 1; }

  void validate() const;
};

inline std::string to_string(Boundary b) { return b == Boundary::free ? "free" : "periodic"; }

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::nearest_neighbor: return "nearest_neighbor";
    case Variant::layered: return "layered";
    case Variant::spread_out: return "spread_out";
  }
  return "?";
}

inline std::string to_string(RangeNorm n) { return n == RangeNorm::sup ? "sup" : "l1"; }

inline Boundary parse_boundary(const std::string& s) {
  if (s == "free") return Boundary::free;
  if (s == "periodic") return Boundary::periodic;
  throw SpecError("unknown boundary '" + s + "' (expected free|periodic)");
}

inline Variant parse_variant(const std::string& s) {
  if (s == "nearest_neighbor") return Variant::nearest_neighbor;
  if (s == "layered") return Variant::layered;
  if (s == "spread_out") return Variant::spread_out;
  throw SpecError("unknown variant '" + s + "' (expected nearest_neighbor|layered|spread_out)");
}

inline RangeNorm parse_norm(const std::string& s) {
  if (s == "sup") return RangeNorm::sup;
  if (s == "l1") return RangeNorm::l1;
  throw SpecError("unknown norm '" + s + "' (expected sup|l1)");
}

// The 2d unit vectors of Z^d, ordered +e_1, -e_1, +e_2, -e_2, ...
inline std::vector<Coord> unit_vectors(int d) {
  if (d < 1) throw SpecError("unit_vectors: d must be >= 1");
  std::vector<Coord> out;
  out.reserve(2 * static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    for (int sign : {+1, -1}) {
      Coord v(d, 0);
      v[i] = sign;
      out.push_back(std::move(v));
    }
  }
  return out;
}

// All nonzero vectors of norm <= k, in lexicographic order.
inline std::vector<Coord> ball_vectors(int d, int k, RangeNorm norm = RangeNorm::sup) {
  if (d < 1 || k < 1) throw SpecError("ball_vectors: need d >= 1 and k >= 1");
  std::vector<Coord> out;
  Coord v(d, -k);
  for (;;) {
    int sup = 0, l1 = 0;
    for (int x : v) {
      sup = std::max(sup, std::abs(x));
      l1 += std::abs(x);
    }
    const int n = norm == RangeNorm::sup ? sup : l1;
    if (n != 0 && n <= k) out.push_back(v);
    int i = d - 1;
    while (i >= 0 && v[i] == k) v[i--] = -k;
    if (i < 0) break;
    ++v[i];
  }
  return out;
}

// The direction set U of the Z^d factor: unit vectors, or the range-k ball.
inline std::vector<Coord> neighborhood(const LatticeSpec& spec) {
  if (spec.variant == Variant::spread_out) return ball_vectors(spec.d, spec.range, spec.norm);
  return unit_vectors(spec.d);
}

// One representative per +-pair of U: first nonzero component positive.
inline std::vector<Coord> forward_half(const std::vector<Coord>& dirs) {
  std::vector<Coord> out;
  for (const auto& v : dirs) {
    auto nz = std::find_if(v.begin(), v.end(), [](int x) { return x != 0; });
    if (nz != v.end() && *nz > 0) out.push_back(v);
  }
  std::sort(out.begin(), out.end(), [](const Coord& a, const Coord& b) {
    // +e_1 < +e_2 < ... for the nearest-neighbour case: compare reversed lexicographic
    // order so that axis 0 comes first.
    return std::lexicographical_compare(b.begin(), b.end(), a.begin(), a.end());
  });
  return out;
}

inline void LatticeSpec::validate() const {
  if (d < 1) throw SpecError("lattice.d must be >= 1");
  if (s < 0) throw SpecError("lattice.s must be >= 0");
  if (side_d < 2) throw SpecError("lattice.side_d must be >= 2");
  if (s > 0 && side_s < 2) throw SpecError("lattice.side_s must be >= 2");
  if (variant == Variant::layered) {
    if (s != 1) throw SpecError("lattice.variant layered requires s = 1");
    if (layers < 1) throw SpecError("lattice.layers must be >= 1");
    if (side_s != layers + 1) throw SpecError("lattice.side_s must equal layers + 1 for layered");
    if (boundary_s != Boundary::periodic)
      throw SpecError("lattice.boundary.s must be periodic for layered (vertical sums mod l+1)");
  } else if (s > 0 && boundary_s == Boundary::periodic && side_s < 3) {
    throw SpecError("lattice.side_s must be >= 3 for a periodic Z^s factor");
  }
  if (variant == Variant::spread_out && range < 1)
    throw SpecError("lattice.range must be >= 1");
  if (boundary_d == Boundary::periodic && side_d <= 2 * reach())
    throw SpecError("lattice.side_d must exceed 2*range for a periodic Z^d factor");
  if (multigraph && s != 1) throw UnsupportedVariant("multigraph requires s = 1");

  // Vertex and edge indices are 32-bit.
  constexpr double limit = static_cast<double>(std::numeric_limits<std::uint32_t>::max() - 1);
  double vertices = 1.0;
  for (int i = 0; i < d; ++i) vertices *= side_d;
  for (int j = 0; j < s; ++j) vertices *= side_s;
  const double u_size = static_cast<double>(neighborhood(*this).size());
  const double per_vertex = u_size / 2.0 + s * (multigraph ? u_size : 1.0);
  if (vertices > limit || vertices * per_vertex > limit)
    throw SpecError("lattice too large: vertex or edge index exceeds 32 bits");
}

struct Vertex {
  Coord u;  // Z^d component
  Coord t;  // Z^s component
  bool operator==(const Vertex&) const = default;
};

struct Edge {
  std::uint32_t a = 0;         // base vertex
  std::uint32_t b = 0;         // a + step(dir), boundary rule applied
  EdgeClass cls = EdgeClass::d_edge;
  std::uint16_t dir = 0;       // index into Lattice::steps()
  std::int16_t parallel = -1;  // index into U for multigraph vertical edges, else -1
};

struct Incidence {
  std::uint32_t edge;
  std::uint32_t other;
};

// The Z^d factor alone: a box of side L, used by the edge ordering and by the
// coupling, which explores Z^d while keeping heights separately.
class ZdBox {
public:
  ZdBox(int d, int side, Boundary boundary, std::vector<Coord> dirs)
      : d_(d), side_(side), boundary_(boundary), dirs_(std::move(dirs)), forward_(forward_half(dirs_)) {
    size_ = 1;
    for (int i = 0; i < d_; ++i) size_ *= static_cast<std::uint32_t>(side_);
  }

  int dim() const { return d_; }
  int side() const { return side_; }
  Boundary boundary() const { return boundary_; }
  std::uint32_t size() const { return size_; }
  const std::vector<Coord>& directions() const { return dirs_; }
  const std::vector<Coord>& forward() const { return forward_; }

  Coord coords(std::uint32_t u) const {
    Coord c(d_);
    for (int i = d_ - 1; i >= 0; --i) {
      c[i] = static_cast<int>(u % side_);
      u /= side_;
    }
    return c;
  }

  std::uint32_t index(const Coord& c) const {
    std::uint32_t u = 0;
    for (int i = 0; i < d_; ++i) u = u * side_ + static_cast<std::uint32_t>(c[i]);
    return u;
  }

  std::uint32_t center() const { return index(Coord(d_, side_ / 2)); }

  // u + w with the boundary rule applied; -1 when the translate leaves a free box.
  std::int64_t translate(std::uint32_t u, const Coord& w) const {
    Coord c = coords(u);
    for (int i = 0; i < d_; ++i) {
      int x = c[i] + w[i];
      if (x < 0 || x >= side_) {
        if (boundary_ == Boundary::free) return -1;
        x = ((x % side_) + side_) % side_;
      }
      c[i] = x;
    }
    return index(c);
  }

  // True when some U-neighbour of u lies outside the (free) box.
  bool in_shell(std::uint32_t u) const {
    if (boundary_ == Boundary::periodic) return false;
    const int k = reach();
    for (int x : coords(u))
      if (x < k || x >= side_ - k) return true;
    return false;
  }

  int reach() const {
    int k = 0;
    for (const auto& v : dirs_)
      for (int x : v) k = std::max(k, std::abs(x));
    return k;
  }

  // Index of direction w in U, or -1.
  int direction_index(const Coord& w) const {
    auto it = std::find(dirs_.begin(), dirs_.end(), w);
    return it == dirs_.end() ? -1 : static_cast<int>(it - dirs_.begin());
  }

private:
  int d_;
  int side_;
  Boundary boundary_;
  std::vector<Coord> dirs_;
  std::vector<Coord> forward_;
  std::uint32_t size_ = 1;
};

// Fixed total order on the Z^d-edges of a ZdBox: lexicographic on
// (base vertex u, forward direction). Ranks are dense in [0, size()).
class EdgeOrdering {
public:
  explicit EdgeOrdering(const ZdBox& box) : box_(box) {
    const std::size_t nf = box_.forward().size();
    slot_rank_.assign(static_cast<std::size_t>(box_.size()) * nf, -1);
    for (std::uint32_t u = 0; u < box_.size(); ++u) {
      for (std::size_t f = 0; f < nf; ++f) {
        if (box_.translate(u, box_.forward()[f]) < 0) continue;
        const std::size_t slot = u * nf + f;
        slot_rank_[slot] = static_cast<std::int64_t>(rank_slot_.size());
        rank_slot_.push_back(slot);
      }
    }
  }

  std::size_t size() const { return rank_slot_.size(); }

  // Rank of the edge <u, u + forward[f]>, or -1 if it is not in the box.
  std::int64_t rank(std::uint32_t u, std::size_t f) const {
    return slot_rank_[static_cast<std::size_t>(u) * box_.forward().size() + f];
  }

  // Rank of the edge joining u and u + w for any w in U (either orientation).
  std::int64_t rank_between(std::uint32_t u, const Coord& w) const {
    const auto& fw = box_.forward();
    for (std::size_t f = 0; f < fw.size(); ++f) {
      if (fw[f] == w) return rank(u, f);
    }
    Coord neg(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) neg[i] = -w[i];
    const std::int64_t other = box_.translate(u, w);
    if (other < 0) return -1;
    for (std::size_t f = 0; f < fw.size(); ++f) {
      if (fw[f] == neg) return rank(static_cast<std::uint32_t>(other), f);
    }
    return -1;
  }

  std::pair<std::uint32_t, std::size_t> edge(std::size_t r) const {
    const std::size_t nf = box_.forward().size();
    const std::size_t slot = rank_slot_[r];
    return {static_cast<std::uint32_t>(slot / nf), slot % nf};
  }

  std::pair<std::uint32_t, std::uint32_t> endpoints(std::size_t r) const {
    auto [u, f] = edge(r);
    return {u, static_cast<std::uint32_t>(box_.translate(u, box_.forward()[f]))};
  }

  const ZdBox& box() const { return box_; }

private:
  ZdBox box_;
  std::vector<std::int64_t> slot_rank_;
  std::vector<std::size_t> rank_slot_;
};

class Lattice {
public:
  explicit Lattice(LatticeSpec spec)
      : spec_(std::move(spec)),
        box_((spec_.validate(), ZdBox(spec_.d, spec_.side_d, spec_.boundary_d, neighborhood(spec_)))) {
    layer_size_ = box_.size();
    layers_ = 1;
    for (int j = 0; j < spec_.s; ++j) layers_ *= static_cast<std::uint32_t>(spec_.side_s);
    num_vertices_ = layer_size_ * layers_;

    const int D = dims();
    strides_.assign(D, 1);
    for (int i = spec_.d - 2; i >= 0; --i) strides_[i] = strides_[i + 1] * spec_.side_d;
    for (int j = D - 2; j >= spec_.d; --j) strides_[j] = strides_[j + 1] * spec_.side_s;
    for (const auto& f : box_.forward()) {
      Coord step(D, 0);
      std::copy(f.begin(), f.end(), step.begin());
      steps_.push_back(std::move(step));
    }
    for (int j = 0; j < spec_.s; ++j) {
      Coord step(D, 0);
      step[spec_.d + j] = 1;
      steps_.push_back(std::move(step));
    }
    build_edges();
    build_adjacency();
  }

  const LatticeSpec& spec() const { return spec_; }
  const ZdBox& zd_box() const { return box_; }
  int dims() const { return spec_.d + spec_.s; }
  std::uint32_t num_vertices() const { return num_vertices_; }
  std::uint32_t layer_size() const { return layer_size_; }
  std::uint32_t num_layers() const { return layers_; }
  std::size_t num_edges() const { return edges_.size(); }
  std::span<const Edge> edges() const { return edges_; }
  const Edge& edge(std::size_t e) const { return edges_[e]; }
  const std::vector<Coord>& steps() const { return steps_; }
  const std::vector<Coord>& directions() const { return box_.directions(); }

  // Number of parallel copies of each vertical edge (1 unless multigraph).
  std::size_t parallel_count() const { return spec_.multigraph ? box_.directions().size() : 1; }

  std::size_t count(EdgeClass cls) const {
    return static_cast<std::size_t>(
        std::count_if(edges_.begin(), edges_.end(), [cls](const Edge& e) { return e.cls == cls; }));
  }

  int side(int axis) const { return axis < spec_.d ? spec_.side_d : spec_.side_s; }

  // A ring along this axis that admits winding clusters (periodic, side >= 3).
  bool is_ring(int axis) const {
    const Boundary b = axis < spec_.d ? spec_.boundary_d : spec_.boundary_s;
    return b == Boundary::periodic && side(axis) >= 3;
  }

  Coord coordinates(std::uint32_t v) const {
    Coord c(dims());
    std::uint32_t u = v % layer_size_;
    std::uint32_t t = v / layer_size_;
    for (int i = spec_.d - 1; i >= 0; --i) {
      c[i] = static_cast<int>(u % spec_.side_d);
      u /= spec_.side_d;
    }
    for (int j = spec_.s - 1; j >= 0; --j) {
      c[spec_.d + j] = static_cast<int>(t % spec_.side_s);
      t /= spec_.side_s;
    }
    return c;
  }

  std::uint32_t index(const Coord& c) const {
    std::uint32_t u = 0, t = 0;
    for (int i = 0; i < spec_.d; ++i) u = u * spec_.side_d + static_cast<std::uint32_t>(c[i]);
    for (int j = 0; j < spec_.s; ++j) t = t * spec_.side_s + static_cast<std::uint32_t>(c[spec_.d + j]);
    return t * layer_size_ + u;
  }

  // Single coordinate of vertex v along axis (Z^d axes first).
  int coordinate(std::uint32_t v, int axis) const {
    if (axis < spec_.d) return static_cast<int>((v % layer_size_) / strides_[axis] % spec_.side_d);
    return static_cast<int>((v / layer_size_) / strides_[axis] % spec_.side_s);
  }

  Vertex vertex_at(std::uint32_t v) const {
    Coord c = coordinates(v);
    return Vertex{Coord(c.begin(), c.begin() + spec_.d), Coord(c.begin() + spec_.d, c.end())};
  }

  std::uint32_t index_of(const Vertex& x) const {
    if (static_cast<int>(x.u.size()) != spec_.d || static_cast<int>(x.t.size()) != spec_.s)
      throw SpecError("vertex has wrong dimension");
    Coord c = x.u;
    c.insert(c.end(), x.t.begin(), x.t.end());
    for (int a = 0; a < dims(); ++a)
      if (c[a] < 0 || c[a] >= side(a)) throw SpecError("vertex outside box");
    return index(c);
  }

  // Centre of the box; cluster observables refer to C(origin).
  std::uint32_t origin() const {
    Coord c(dims());
    for (int a = 0; a < dims(); ++a) c[a] = side(a) / 2;
    return index(c);
  }

  std::span<const Incidence> neighbors(std::uint32_t v) const {
    return {adjacency_.data() + offsets_[v], adjacency_.data() + offsets_[v + 1]};
  }

  // Multigraph edge -> index of the corresponding edge of the plain lattice.
  std::uint32_t collapsed(std::size_t e) const { return collapse_[e]; }
  std::size_t num_collapsed_edges() const { return collapsed_count_; }

private:
  void build_edges() {
    const int D = dims();
    const std::size_t m = parallel_count();
    const auto nd = static_cast<std::uint16_t>(box_.forward().size());
    for (std::uint32_t v = 0; v < num_vertices_; ++v) {
      const Coord c = coordinates(v);
      for (std::uint16_t dir = 0; dir < steps_.size(); ++dir) {
        Coord target = c;
        bool inside = true;
        for (int a = 0; a < D && inside; ++a) {
          if (steps_[dir][a] == 0) continue;
          int x = c[a] + steps_[dir][a];
          if (x < 0 || x >= side(a)) {
            if (is_ring(a)) {
              x = ((x % side(a)) + side(a)) % side(a);
            } else {
              inside = false;
            }
          }
          target[a] = x;
        }
        if (!inside) continue;
        const EdgeClass cls = dir < nd ? EdgeClass::d_edge : EdgeClass::s_edge;
        const std::uint32_t b = index(target);
        if (cls == EdgeClass::s_edge && spec_.multigraph) {
          for (std::size_t k = 0; k < m; ++k) {
            edges_.push_back(Edge{v, b, cls, dir, static_cast<std::int16_t>(k)});
            collapse_.push_back(static_cast<std::uint32_t>(collapsed_count_));
          }
        } else {
          edges_.push_back(Edge{v, b, cls, dir, -1});
          collapse_.push_back(static_cast<std::uint32_t>(collapsed_count_));
        }
        ++collapsed_count_;
      }
    }
  }

  void build_adjacency() {
    offsets_.assign(num_vertices_ + 1, 0);
    for (const auto& e : edges_) {
      ++offsets_[e.a + 1];
      ++offsets_[e.b + 1];
    }
    for (std::uint32_t v = 0; v < num_vertices_; ++v) offsets_[v + 1] += offsets_[v];
    adjacency_.resize(offsets_.back());
    std::vector<std::uint32_t> fill(offsets_.begin(), offsets_.end() - 1);
    for (std::uint32_t i = 0; i < edges_.size(); ++i) {
      adjacency_[fill[edges_[i].a]++] = Incidence{i, edges_[i].b};
      adjacency_[fill[edges_[i].b]++] = Incidence{i, edges_[i].a};
    }
  }

  LatticeSpec spec_;
  ZdBox box_;
  std::uint32_t layer_size_ = 1;
  std::uint32_t layers_ = 1;
  std::uint32_t num_vertices_ = 1;
  std::vector<std::uint32_t> strides_;
  std::vector<Coord> steps_;
  std::vector<Edge> edges_;
  std::vector<std::uint32_t> collapse_;
  std::size_t collapsed_count_ = 0;
  std::vector<std::uint32_t> offsets_;
  std::vector<Incidence> adjacency_;
};

// Explicit edge list of the box (every edge once, classes assigned).
inline std::vector<Edge> enumerate_edges(const LatticeSpec& spec) {
  Lattice lattice(spec);
  return {lattice.edges().begin(), lattice.edges().end()};
}

// Replace each vertical edge by |U| parallel edges indexed by U.
inline LatticeSpec build_multigraph(LatticeSpec spec) {
  if (spec.s != 1) throw UnsupportedVariant("build_multigraph requires s = 1");
  spec.multigraph = true;
  spec.validate();
  return spec;
}

inline LatticeSpec collapse_multigraph(LatticeSpec spec) {
  spec.multigraph = false;
  return spec;
}

// Incident edges of a vertex together with their far endpoints.
inline std::vector<std::pair<Edge, Vertex>> neighbors(const Lattice& lattice, const Vertex& x) {
  std::vector<std::pair<Edge, Vertex>> out;
  for (const auto& inc : lattice.neighbors(lattice.index_of(x)))
    out.emplace_back(lattice.edge(inc.edge), lattice.vertex_at(inc.other));
  return out;
}

}  // namespace anisoperc
