#pragma once

// Deterministic pseudo-randomness. Streams are derived by hashing a base
// seed with arbitrary tags, so any point in a run (a training step, a scene,
// a texture) gets an independent generator that does not depend on how many
// draws happened elsewhere. That keeps resumed runs bit-identical.

#include <cmath>
#include <cstdint>
#include <vector>

namespace stylesplat {

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline uint64_t hash_combine(uint64_t a, uint64_t b) {
  uint64_t s = a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
  return splitmix64(s);
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(splitmix64(seed)) {}

  // Independent substream tagged by one or more integers.
  Rng stream(uint64_t tag) const { return Rng(hash_combine(state_, tag)); }
  Rng stream(uint64_t a, uint64_t b) const { return stream(a).stream(b); }

  uint64_t next_u64() { return splitmix64(state_); }

  uint32_t next_u32() { return static_cast<uint32_t>(next_u64() >> 32); }

  // Uniform in [0, 1).
  float uniform() { return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f; }

  float uniform(float lo, float hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  int below(int n) { return static_cast<int>(next_u64() % static_cast<uint64_t>(n)); }

  // Standard normal via Box-Muller.
  float normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    float u1 = uniform();
    float u2 = uniform();
    if (u1 < 1e-12f) u1 = 1e-12f;
    float r = std::sqrt(-2.0f * std::log(u1));
    float theta = 6.28318530717958647f * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  float normal(float mean, float stddev) { return mean + stddev * normal(); }

  // Normal truncated to [-2, 2] standard deviations (transformer init).
  float trunc_normal(float stddev) {
    float v;
    do {
      v = normal();
    } while (v < -2.0f || v > 2.0f);
    return v * stddev;
  }

  std::vector<float> normal_vec(size_t n, float stddev) {
    std::vector<float> out(n);
    for (auto& v : out) v = normal(0.0f, stddev);
    return out;
  }

  std::vector<float> trunc_normal_vec(size_t n, float stddev) {
    std::vector<float> out(n);
    for (auto& v : out) v = trunc_normal(stddev);
    return out;
  }

  std::vector<float> uniform_vec(size_t n, float lo, float hi) {
    std::vector<float> out(n);
    for (auto& v : out) v = uniform(lo, hi);
    return out;
  }

  // k distinct integers from [0, n), in draw order.
  std::vector<int> sample_distinct(int n, int k) {
    std::vector<int> out;
    out.reserve(k);
    while (static_cast<int>(out.size()) < k) {
      int v = below(n);
      bool dup = false;
      for (int u : out)
        if (u == v) dup = true;
      if (!dup) out.push_back(v);
    }
    return out;
  }

  uint64_t state() const { return state_; }

 private:
  uint64_t state_;
  float spare_ = 0.0f;
  bool have_spare_ = false;
};

}  // namespace stylesplat
