#pragma once

#include <cstdint>
#include <vector>

namespace branchlab {

// SplitMix64, used only to expand seeds into stream parameters.
struct SplitMix64 {
  std::uint64_t state;

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
};

// PCG32 (O'Neill). Each Monte Carlo replica gets its own stream derived
// from (master_seed, replica), so serial and parallel runs agree bit for bit.
class Pcg32 {
 public:
  Pcg32() : Pcg32(0x853c49e6748fea9bULL, 0xda3e39cb94b95bdbULL) {}

  Pcg32(std::uint64_t init_state, std::uint64_t init_seq) {
    state_ = 0u;
    inc_ = (init_seq << 1u) | 1u;
    next_u32();
    state_ += init_state;
    next_u32();
  }

  static Pcg32 for_replica(std::uint64_t master_seed, std::uint64_t replica) {
    SplitMix64 sm{master_seed ^ (0x2545f4914f6cdd1dULL * (replica + 1))};
    std::uint64_t s = sm.next();
    std::uint64_t q = sm.next();
    return Pcg32(s, q);
  }

  std::uint32_t next_u32() {
    std::uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    std::uint32_t xorshifted =
        static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    std::uint32_t rot = static_cast<std::uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
  }

  std::uint64_t next_u64() {
    std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  // Uniform in [0,1) with 53 random bits; platform-independent.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Unbiased integer in [0, bound) by rejection.
  std::uint32_t bounded(std::uint32_t bound) {
    if (bound <= 1) return 0;
    std::uint32_t threshold = (-bound) % bound;
    for (;;) {
      std::uint32_t r = next_u32();
      if (r >= threshold) return r % bound;
    }
  }

 private:
  std::uint64_t state_;
  std::uint64_t inc_;
};

// Categorical draw by CDF walk over fixed-order weights (must sum to ~1;
// any rounding remainder falls on the last entry).
inline std::size_t sample_categorical(const std::vector<double>& weights,
                                      Pcg32& rng) {
  double u = rng.next_double();
  double cum = 0.0;
  for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
    cum += weights[i];
    if (u < cum) return i;
  }
  return weights.empty() ? 0 : weights.size() - 1;
}

// Binomial(n, p) as n Bernoulli trials. Offspring counts are small at the
// scales this simulator targets, so the O(n) cost is irrelevant.
inline std::uint32_t sample_binomial(std::uint32_t n, double p, Pcg32& rng) {
  if (p <= 0.0) return 0;
  if (p >= 1.0) return n;
  std::uint32_t k = 0;
  for (std::uint32_t i = 0; i < n; ++i)
    if (rng.next_double() < p) ++k;
  return k;
}

// Geometric count on {0,1,2,...} with mass (1/(1+mean))(mean/(1+mean))^n,
// sampled by CDF walk (expected iterations 1+mean).
inline std::uint64_t sample_geometric_count(double mean, Pcg32& rng) {
  double r = mean / (1.0 + mean);
  double u = rng.next_double();
  double term = 1.0 / (1.0 + mean);
  double cum = term;
  std::uint64_t n = 0;
  while (u >= cum) {
    term *= r;
    cum += term;
    ++n;
    if (term <= 0.0) break;  // underflow guard, far beyond any quantile used
  }
  return n;
}

}  // namespace branchlab
