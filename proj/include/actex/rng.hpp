#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace actex {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// xoshiro256++ seeded through splitmix64. Self-contained so that streams are
// bit-reproducible across standard libraries and platforms.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // uniform in [0, 1)
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return next_double() < p; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  double exponential(double mean) { return -mean * std::log1p(-next_double()); }

  // unbiased integer in [0, n)
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4];
};

// Seed for the per-(seed, replicate, participant) stream. Outputs depend only
// on these three values, never on scheduling; this is the determinism contract
// for all parallel loops.
inline std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t replicate,
                                        std::string_view participant_id) {
  std::uint64_t z = seed;
  splitmix64(z);
  z ^= 0x9E3779B97F4A7C15ULL * (replicate + 1);
  splitmix64(z);
  z ^= fnv1a64(participant_id);
  std::uint64_t out = z;
  return splitmix64(out);
}

// Seed for auxiliary streams keyed by small integers (restarts, repetitions).
inline std::uint64_t derive_sub_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t z = seed;
  splitmix64(z);
  z ^= 0xD1B54A32D192ED03ULL * (a + 1);
  splitmix64(z);
  z ^= 0x8CB92BA72F3D8DD7ULL * (b + 1);
  std::uint64_t out = z;
  return splitmix64(out);
}

}  // namespace actex
