#pragma once

// Counter-based randomness. Every draw is a pure function of
// (seed, stream, key_a, key_b, index), so different samplers can draw
// per-position values in whatever order their control flow dictates and
// still produce bit-identical values for the same logical draw. This is
// what makes the cross-sampler equivalence checks exact.

#include <cmath>
#include <cstdint>
#include <vector>

namespace rdlm {

enum class RngStream : uint64_t {
  weights = 1,      // model parameter init, sequential
  state_init = 2,   // latent state init, keyed by absolute position
  state_noise = 3,  // per-step noise injection, keyed by (position, step)
  token_sample = 4, // nucleus sampling draws, keyed by (position, age)
  headway_fill = 5, // random filler tokens for headway > 1
  prompt = 6,       // random prompt construction
  probe = 7,        // test-only probes
};

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t rng_key(uint64_t seed, RngStream stream, uint64_t a = 0, uint64_t b = 0) {
  uint64_t k = splitmix64(seed ^ 0x6a09e667f3bcc909ull);
  k = splitmix64(k ^ static_cast<uint64_t>(stream));
  k = splitmix64(k ^ a);
  k = splitmix64(k ^ b);
  return k;
}

// Uniform in (0, 1]; never 0, so log() stays finite.
inline double uniform_at(uint64_t key, uint64_t index) {
  const uint64_t bits = splitmix64(key ^ splitmix64(index + 0x51afd7ed558ccd25ull));
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

// Standard normal, element `index` of the stream identified by `key`
// (Box-Muller on two counter draws).
inline float normal_at(uint64_t key, uint64_t index) {
  const double u1 = uniform_at(key, 2 * index);
  const double u2 = uniform_at(key, 2 * index + 1);
  const double r = std::sqrt(-2.0 * std::log(u1));
  return static_cast<float>(r * std::cos(6.283185307179586 * u2));
}

inline void fill_normal(uint64_t key, float* out, size_t n, float stddev) {
  for (size_t i = 0; i < n; ++i) {
    out[i] = normal_at(key, i) * stddev;
  }
}

inline int uniform_int(uint64_t key, uint64_t index, int n) {
  const uint64_t bits = splitmix64(key ^ splitmix64(index + 0xb5026f5aa96619e9ull));
  return static_cast<int>(bits % static_cast<uint64_t>(n));
}

}  // namespace rdlm
