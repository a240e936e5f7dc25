#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace fishctl {

// splitmix64: used for seed mixing and sub-stream derivation only.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Sub-stream rule: sample path k of a batch seeded with `seed` draws from
// substream(seed, k). Batches are therefore order-independent under
// parallel execution.
inline uint64_t substream(uint64_t seed, uint64_t k) {
  return splitmix64(seed ^ splitmix64(k + 1));
}

// mt19937_64 with Box-Muller normals. std::normal_distribution is not
// specified bit-exactly across standard libraries, so normals are produced
// here directly: two 53-bit uniforms per draw, no cached second value.
class NormalRng {
 public:
  explicit NormalRng(uint64_t seed) : gen_(seed) {}

  double uniform() {
    // in (0, 1]
    return (static_cast<double>(gen_() >> 11) + 1.0) * 0x1p-53;
  }

  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace fishctl
