#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace mmv {

// Philox4x32-10 counter-based generator (Salmon et al., Random123). Streams are
// pure functions of (seed, particle, step, channel, draw index), so sampled noise
// is independent of execution order and worker count.

namespace detail {

inline void philox_round(std::array<uint32_t, 4>& ctr, std::array<uint32_t, 2>& key) {
  constexpr uint64_t kMul0 = 0xD2511F53ull;
  constexpr uint64_t kMul1 = 0xCD9E8D57ull;
  const uint64_t p0 = kMul0 * ctr[0];
  const uint64_t p1 = kMul1 * ctr[2];
  const uint32_t hi0 = static_cast<uint32_t>(p0 >> 32), lo0 = static_cast<uint32_t>(p0);
  const uint32_t hi1 = static_cast<uint32_t>(p1 >> 32), lo1 = static_cast<uint32_t>(p1);
  ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  key[0] += 0x9E3779B9u;  // golden ratio
  key[1] += 0xBB67AE85u;  // sqrt(3)-1
}

inline std::array<uint32_t, 4> philox4x32(std::array<uint32_t, 4> ctr, std::array<uint32_t, 2> key) {
  for (int i = 0; i < 10; ++i) philox_round(ctr, key);
  return ctr;
}

}  // namespace detail

/// Channel ids keep draws for different purposes on disjoint streams.
namespace channel {
inline constexpr uint32_t brownian = 1;
inline constexpr uint32_t bridge = 2;
inline constexpr uint32_t jump_count = 3;
inline constexpr uint32_t jump_time = 4;
inline constexpr uint32_t jump_mark = 5;
inline constexpr uint32_t initial = 6;
inline constexpr uint32_t sampler = 7;
}  // namespace channel

/// A keyed random stream. Successive calls advance the draw counter; two streams
/// with the same key produce identical sequences on any machine/thread layout.
class CounterStream {
public:
  CounterStream(uint64_t seed, uint32_t particle, uint32_t step, uint32_t chan)
      : key_{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)},
        base_{particle, step, chan, 0} {}

  uint64_t next_u64() {
    if (!have_half_) {
      auto ctr = base_;
      ctr[3] = draw_++;
      auto out = detail::philox4x32(ctr, key_);
      uint64_t a = (static_cast<uint64_t>(out[0]) << 32) | out[1];
      half_ = (static_cast<uint64_t>(out[2]) << 32) | out[3];
      have_half_ = true;
      return a;
    }
    have_half_ = false;
    return half_;
  }

  /// Uniform on (0,1): never returns 0 or 1.
  double u01() {
    const uint64_t bits = next_u64() >> 11;  // 53 bits
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; pairs are cached within the stream.
  double normal() {
    if (have_normal_) {
      have_normal_ = false;
      return normal_cache_;
    }
    const double u1 = u01(), u2 = u01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    normal_cache_ = r * std::sin(a);
    have_normal_ = true;
    return r * std::cos(a);
  }

  /// Poisson count by inversion from a single uniform (finite rate).
  int poisson(double rate) {
    if (rate <= 0.0) return 0;
    double u = u01();
    double p = std::exp(-rate), cdf = p;
    int k = 0;
    while (u > cdf && k < 10000) {
      ++k;
      p *= rate / k;
      cdf += p;
    }
    return k;
  }

private:
  std::array<uint32_t, 2> key_;
  std::array<uint32_t, 4> base_;
  uint32_t draw_ = 0;
  uint64_t half_ = 0;
  bool have_half_ = false;
  bool have_normal_ = false;
  double normal_cache_ = 0.0;
};

/// FNV-1a over a string; used for config hashes in run manifests.
inline uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace mmv
