#include "doctest.h"

#include <set>
#include <vector>

#include "anisoperc/rng.hpp"

using namespace anisoperc;

TEST_CASE("Philox4x32-10 known-answer vectors") {
  CHECK(philox4x32({0, 0, 0, 0}, 0) == Counter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, 0xffffffffffffffffull) ==
        Counter{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  const std::uint64_t key = (std::uint64_t{0x299f31d0} << 32) | 0xa4093822;
  CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, key) ==
        Counter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("Bernoulli thresholds") {
  CHECK(bernoulli_threshold(0.0) == 0);
  CHECK(bernoulli_threshold(1.0) == (std::uint64_t{1} << 32));
  CHECK(bernoulli(0xffffffffu, bernoulli_threshold(1.0)));
  CHECK_FALSE(bernoulli(0u, bernoulli_threshold(0.0)));
  CHECK(bernoulli_threshold(0.5) == (std::uint64_t{1} << 31));
}

TEST_CASE("streams") {
  Stream a(7, 0), b(7, 0), c(7, 1), d(8, 0);
  std::vector<std::uint32_t> xa, xb, xc, xd;
  for (int i = 0; i < 16; ++i) {
    xa.push_back(a());
    xb.push_back(b());
    xc.push_back(c());
    xd.push_back(d());
  }
  CHECK(xa == xb);
  CHECK(xa != xc);
  CHECK(xa != xd);
  double sum = 0;
  Stream u(3, 3);
  for (int i = 0; i < 100000; ++i) sum += u.uniform();
  CHECK(sum / 100000 == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("seed plan substreams are distinct") {
  std::set<std::uint64_t> ids;
  for (std::uint32_t e = 0; e < 20; ++e)
    for (std::uint32_t r = 0; r < 50; ++r) CHECK(ids.insert(SeedPlan::substream(e, r)).second);
  CHECK(tag(Domain::coupling_vertical, 3) != tag(Domain::coupling_vertical, 2));
}
