#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace fcppn {

// SplitMix64 finaliser (Steele, Lea & Flood). Used to expand seeds.
constexpr std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// xoshiro256** 1.0 (Blackman & Vigna).
//
// Seeding: the four state words are the first four outputs of SplitMix64
// started at `seed`. Independent streams (one per network layer, one per
// extractor level) use derive_seed(seed, stream), which is
// splitmix64(seed ^ splitmix64(stream)) with each splitmix64 call started
// from the given value.
//
// uniform() takes the top 53 bits: (next() >> 11) * 2^-53, in [0, 1).
// normal() is Box-Muller on two consecutive uniforms u1, u2:
//   sqrt(-2 ln(1 - u1)) * cos(2 pi u2)
// and consumes exactly two draws per sample (the sine branch is discarded).
// These rules are enough to reproduce parameter draws in another language.
class Xoshiro256 {
 public:
  explicit constexpr Xoshiro256(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64(sm);
  }

  static constexpr std::uint64_t derive_seed(std::uint64_t seed,
                                             std::uint64_t stream) {
    std::uint64_t a = stream;
    std::uint64_t b = seed ^ splitmix64(a);
    return splitmix64(b);
  }

  constexpr std::uint64_t next() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(1.0 - u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  // Uniform integer in [0, bound) by rejection.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t v;
    do {
      v = next();
    } while (v >= limit);
    return v % bound;
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t s_[4]{};
};

}  // namespace fcppn
