#pragma once

// Counter-based random numbers (Philox4x32-10).
//
// Every random draw in the library is a pure function of (key, counter):
// the key is the 64-bit master seed and the counter encodes what is being
// drawn. The top counter word carries a domain tag, so draws from different
// subsystems (configuration sampling, coupling probes, ...) can never share a
// counter, and replicas differ in the stream words.

#include <array>
#include <cstdint>
#include <limits>

namespace anisoperc {

using Counter = std::array<std::uint32_t, 4>;

namespace detail {

inline void mulhilo32(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

}  // namespace detail

inline Counter philox4x32(Counter ctr, std::uint64_t seed) {
  constexpr std::uint32_t kM0 = 0xD2511F53u;
  constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u;
  constexpr std::uint32_t kW1 = 0xBB67AE85u;
  std::uint32_t k0 = static_cast<std::uint32_t>(seed);
  std::uint32_t k1 = static_cast<std::uint32_t>(seed >> 32);
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    detail::mulhilo32(kM0, ctr[0], hi0, lo0);
    detail::mulhilo32(kM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ k0, lo1, hi0 ^ ctr[3] ^ k1, lo0};
    k0 += kW0;
    k1 += kW1;
  }
  return ctr;
}

// Domain tags (low byte of counter word 3).
enum class Domain : std::uint32_t {
  configuration = 0,
  coupling_horizontal = 1,
  coupling_vertical = 2,
  plain_exploration = 3,
  generic = 4,
};

inline constexpr std::uint32_t tag(Domain d, std::uint32_t extra = 0) {
  return static_cast<std::uint32_t>(d) | (extra << 8);
}

// P(u < threshold) for uniform 32-bit u, within 2^-33 of p.
inline std::uint64_t bernoulli_threshold(double p) {
  if (!(p > 0.0)) return 0;
  if (p >= 1.0) return std::uint64_t{1} << 32;
  return static_cast<std::uint64_t>(p * 4294967296.0 + 0.5);
}

inline bool bernoulli(std::uint32_t u, std::uint64_t threshold) {
  return static_cast<std::uint64_t>(u) < threshold;
}

inline double to_unit(std::uint32_t u) { return (static_cast<double>(u) + 0.5) * 0x1p-32; }

// Sequential stream over the generic domain; satisfies UniformRandomBitGenerator.
class Stream {
public:
  using result_type = std::uint32_t;

  Stream(std::uint64_t seed, std::uint32_t stream_id) : seed_(seed), stream_(stream_id) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (lane_ == 4) {
      block_ = philox4x32({static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
                           stream_, tag(Domain::generic)},
                          seed_);
      ++counter_;
      lane_ = 0;
    }
    return block_[lane_++];
  }

  double uniform() { return to_unit((*this)()); }

private:
  std::uint64_t seed_;
  std::uint32_t stream_;
  std::uint64_t counter_ = 0;
  Counter block_{};
  int lane_ = 4;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Master seed plus replica count. Replica i draws with stream id i under the
// master key; stream ids are distinct by construction.
struct SeedPlan {
  std::uint64_t master = 1;
  std::uint32_t replicas = 1;

  std::uint64_t stream(std::uint32_t replica) const { return replica; }

  // Stream id for replica i of an indexed sub-experiment (e.g. bisection probe j).
  static std::uint64_t substream(std::uint32_t experiment, std::uint32_t replica) {
    return (static_cast<std::uint64_t>(experiment) << 32) | replica;
  }
};

}  // namespace anisoperc
