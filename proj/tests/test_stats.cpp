#include "doctest.h"

#include <cmath>

#include "anisoperc/parallel.hpp"
#include "anisoperc/rng.hpp"
#include "anisoperc/stats.hpp"

using namespace anisoperc;

TEST_CASE("Wilson interval basics") {
  const Estimate e = proportion_estimate(30, 100);
  CHECK(e.value == 0.3);
  CHECK(e.lo <= e.value);
  CHECK(e.value <= e.hi);
  CHECK(e.lo == doctest::Approx(0.2189).epsilon(1e-3));
  CHECK(e.hi == doctest::Approx(0.3958).epsilon(1e-3));
  const Estimate zero = proportion_estimate(0, 50);
  CHECK(zero.lo == 0.0);
  CHECK(zero.hi > 0.0);
  const Estimate all = proportion_estimate(50, 50);
  CHECK(all.hi == 1.0);
  CHECK(all.lo < 1.0);
  CHECK(normal_quantile(0.95) == doctest::Approx(1.959964).epsilon(1e-6));
}

TEST_CASE("Wilson 95% coverage on simulated Bernoulli data lies in [93%, 97%]") {
  for (double p : {0.1, 0.3, 0.5}) {
    Stream rng(42, static_cast<std::uint32_t>(p * 100));
    const std::uint64_t thr = bernoulli_threshold(p);
    int covered = 0;
    const int trials = 10000, n = 200;
    for (int t = 0; t < trials; ++t) {
      std::uint64_t k = 0;
      for (int i = 0; i < n; ++i) k += bernoulli(rng(), thr);
      const Estimate e = proportion_estimate(k, n);
      covered += (e.lo <= p && p <= e.hi);
    }
    const double coverage = static_cast<double>(covered) / trials;
    CHECK(coverage >= 0.93);
    CHECK(coverage <= 0.97);
  }
}

TEST_CASE("mean estimate") {
  const Estimate e = mean_estimate(10, 30, 5);
  CHECK(e.value == 2.0);
  CHECK(e.se == doctest::Approx(std::sqrt(2.5 / 5)));
  CHECK(e.lo < 2.0);
  CHECK(e.hi > 2.0);
  const Estimate c = mean_estimate(5, 5, 5);
  CHECK(c.se == 0.0);
  CHECK(c.lo == 1.0);
}

TEST_CASE("chi-squared tail and two-proportion z") {
  CHECK(chi_squared_sf(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(chi_squared_sf(0.0, 3) == 1.0);
  const Estimate a = proportion_estimate(60, 100), b = proportion_estimate(40, 100);
  CHECK(two_proportion_z(a, b) > 2.8);
  CHECK(two_proportion_z(a, a) == 0.0);
}

TEST_CASE("parallel_map is independent of the worker count") {
  auto fn = [](std::size_t i) { return splitmix64(i) % 1000; };
  const auto one = parallel_map(1000, 1, fn);
  for (unsigned w : {2u, 3u, 8u}) CHECK(parallel_map(1000, w, fn) == one);
  CHECK(parallel_map(0, 4, fn).empty());
  CHECK_THROWS_AS(parallel_map(10, 3, [](std::size_t i) -> int {
                    if (i == 7) throw std::runtime_error("boom");
                    return 0;
                  }),
                  std::runtime_error);
}
