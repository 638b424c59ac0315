#include "doctest.h"

#include <set>

#include "anisoperc/lattice.hpp"

using namespace anisoperc;

TEST_CASE("unit vectors and neighbourhoods") {
  CHECK(unit_vectors(1) == std::vector<Coord>{{1}, {-1}});
  const auto u2 = unit_vectors(2);
  CHECK(u2.size() == 4);
  CHECK(u2 == std::vector<Coord>{{1, 0}, {-1, 0}, {0, 1}, {0, -1}});
  CHECK(ball_vectors(2, 1, RangeNorm::sup).size() == 8);
  CHECK(ball_vectors(2, 1, RangeNorm::l1).size() == 4);
  CHECK(ball_vectors(2, 2, RangeNorm::sup).size() == 24);
  CHECK(neighborhood(LatticeSpec::spread_out(2, 1, 8, 4, 1)).size() == 8);
  for (const auto& w : forward_half(ball_vectors(3, 2))) {
    auto nz = std::find_if(w.begin(), w.end(), [](int x) { return x != 0; });
    CHECK(*nz > 0);
  }
  CHECK_THROWS_AS(unit_vectors(0), SpecError);
}

TEST_CASE("edge enumeration examples") {
  SUBCASE("d=1, s=1, 2x2 free box: 2 d-edges + 2 s-edges") {
    Lattice lat(LatticeSpec::nearest(1, 1, 2, 2, Boundary::free));
    CHECK(lat.num_edges() == 4);
    CHECK(lat.count(EdgeClass::d_edge) == 2);
    CHECK(lat.count(EdgeClass::s_edge) == 2);
  }
  SUBCASE("d=2, s=0, L=2 free: 4 d-edges") {
    Lattice lat(LatticeSpec::nearest(2, 0, 2, 2, Boundary::free));
    CHECK(lat.num_edges() == 4);
    CHECK(lat.count(EdgeClass::d_edge) == 4);
  }
  SUBCASE("bilayer, d=1, L=2: one vertical edge per u, t=0 to t=1") {
    Lattice lat(LatticeSpec::layered(1, 2, 1));
    CHECK(lat.count(EdgeClass::s_edge) == 2);
    for (const auto& e : lat.edges()) {
      if (e.cls != EdgeClass::s_edge) continue;
      CHECK(lat.coordinate(e.a, 1) == 0);
      CHECK(lat.coordinate(e.b, 1) == 1);
    }
  }
  SUBCASE("periodic counts") {
    Lattice lat(LatticeSpec::nearest(2, 1, 5, 4));
    CHECK(lat.num_vertices() == 100);
    CHECK(lat.num_edges() == 300);
  }
  SUBCASE("edges are distinct unordered pairs in a simple periodic box") {
    Lattice lat(LatticeSpec::nearest(3, 1, 3, 3));
    std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
    for (const auto& e : lat.edges()) CHECK(seen.insert(std::minmax(e.a, e.b)).second);
  }
}

TEST_CASE("multigraph") {
  SUBCASE("d=2: each vertical bond becomes 4 parallel edges") {
    const auto plain = LatticeSpec::nearest(2, 1, 3, 3, Boundary::free);
    Lattice p(plain), m(build_multigraph(plain));
    CHECK(m.parallel_count() == 4);
    CHECK(m.count(EdgeClass::s_edge) == 4 * p.count(EdgeClass::s_edge));
    CHECK(m.count(EdgeClass::d_edge) == p.count(EdgeClass::d_edge));
    CHECK(m.num_collapsed_edges() == p.num_edges());
    for (std::size_t e = 0; e < m.num_edges(); ++e) {
      const Edge& me = m.edge(e);
      const Edge& pe = p.edge(m.collapsed(e));
      CHECK(me.a == pe.a);
      CHECK(me.b == pe.b);
      CHECK(me.cls == pe.cls);
      CHECK((me.parallel >= 0) == (me.cls == EdgeClass::s_edge));
    }
  }
  SUBCASE("d=1: 2 parallel edges") {
    Lattice m(build_multigraph(LatticeSpec::nearest(1, 1, 4, 3, Boundary::free)));
    CHECK(m.parallel_count() == 2);
  }
  SUBCASE("collapse round trip") {
    const auto plain = LatticeSpec::nearest(2, 1, 4, 4);
    CHECK(collapse_multigraph(build_multigraph(plain)) == plain);
    CHECK(Lattice(collapse_multigraph(build_multigraph(plain))).num_edges() == Lattice(plain).num_edges());
  }
  CHECK_THROWS_AS(build_multigraph(LatticeSpec::nearest(2, 2, 4, 4)), UnsupportedVariant);
}

TEST_CASE("neighbours") {
  SUBCASE("origin of periodic d=2, s=1 box has degree 6") {
    Lattice lat(LatticeSpec::nearest(2, 1, 5, 5));
    CHECK(lat.neighbors(lat.origin()).size() == 6);
    CHECK(neighbors(lat, lat.vertex_at(lat.origin())).size() == 6);
  }
  SUBCASE("corner of free d=2, s=1 box has degree 3") {
    Lattice lat(LatticeSpec::nearest(2, 1, 5, 5, Boundary::free));
    CHECK(neighbors(lat, Vertex{{0, 0}, {0}}).size() == 3);
  }
  SUBCASE("bilayer: vertical neighbour of t=1 is t=0") {
    Lattice lat(LatticeSpec::layered(2, 4, 1));
    int vertical = 0;
    for (const auto& [e, y] : neighbors(lat, Vertex{{1, 1}, {1}})) {
      if (e.cls != EdgeClass::s_edge) continue;
      ++vertical;
      CHECK(y.t == Coord{0});
      CHECK(y.u == Coord{1, 1});
    }
    CHECK(vertical == 1);
  }
  SUBCASE("layered l=2 wraps mod 3") {
    Lattice lat(LatticeSpec::layered(1, 4, 2));
    std::set<int> ts;
    for (const auto& [e, y] : neighbors(lat, Vertex{{1}, {2}}))
      if (e.cls == EdgeClass::s_edge) ts.insert(y.t[0]);
    CHECK(ts == std::set<int>{0, 1});
  }
  SUBCASE("every vertex has degree 2(d+s) in a periodic box") {
    Lattice lat(LatticeSpec::nearest(3, 2, 3, 3));
    for (std::uint32_t v = 0; v < lat.num_vertices(); ++v) CHECK(lat.neighbors(v).size() == 10);
  }
  SUBCASE("spread-out degree") {
    Lattice lat(LatticeSpec::spread_out(2, 1, 7, 3, 1));
    CHECK(lat.neighbors(lat.origin()).size() == 8 + 2);
  }
}

TEST_CASE("indexing round trips") {
  Lattice lat(LatticeSpec::nearest(2, 2, 4, 3));
  for (std::uint32_t v = 0; v < lat.num_vertices(); ++v) {
    CHECK(lat.index(lat.coordinates(v)) == v);
    CHECK(lat.index_of(lat.vertex_at(v)) == v);
    for (int a = 0; a < lat.dims(); ++a) CHECK(lat.coordinate(v, a) == lat.coordinates(v)[a]);
  }
  CHECK_THROWS_AS(lat.index_of(Vertex{{0, 0}, {0}}), SpecError);
  CHECK_THROWS_AS(lat.index_of(Vertex{{4, 0}, {0, 0}}), SpecError);
}

TEST_CASE("edge ordering") {
  ZdBox box(2, 5, Boundary::free, unit_vectors(2));
  EdgeOrdering ord(box);
  CHECK(ord.size() == 2 * 5 * 4);
  std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
  for (std::size_t r = 0; r < ord.size(); ++r) {
    auto [a, b] = ord.endpoints(r);
    CHECK(seen.insert(std::minmax(a, b)).second);
    auto [u, f] = ord.edge(r);
    CHECK(ord.rank(u, f) == static_cast<std::int64_t>(r));
    if (r) {
      auto [u0, f0] = ord.edge(r - 1);
      CHECK(std::make_pair(u0, f0) < std::make_pair(u, f));
    }
  }
  const std::uint32_t c = box.center();
  CHECK(ord.rank_between(c, {1, 0}) == ord.rank_between(static_cast<std::uint32_t>(box.translate(c, {1, 0})), {-1, 0}));
  CHECK(box.translate(0, {-1, 0}) == -1);
  CHECK(box.in_shell(0));
  CHECK_FALSE(box.in_shell(c));
}

TEST_CASE("validation") {
  auto bad = LatticeSpec::nearest(2, 1, 1, 4);
  CHECK_THROWS_AS(bad.validate(), SpecError);
  auto per2 = LatticeSpec::nearest(2, 1, 2, 4);
  CHECK_THROWS_AS(per2.validate(), SpecError);
  auto lay = LatticeSpec::layered(2, 4, 1);
  lay.side_s = 5;
  CHECK_THROWS_AS(lay.validate(), SpecError);
  auto big = LatticeSpec::nearest(3, 1, 2000, 2000, Boundary::free);
  CHECK_THROWS_AS(big.validate(), SpecError);
  CHECK_NOTHROW(LatticeSpec::nearest(1, 1, 2, 2, Boundary::free).validate());
  CHECK(parse_boundary(to_string(Boundary::free)) == Boundary::free);
  CHECK(parse_variant(to_string(Variant::spread_out)) == Variant::spread_out);
  CHECK_THROWS_AS(parse_variant("hexagonal"), SpecError);
}
