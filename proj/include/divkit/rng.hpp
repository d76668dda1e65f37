#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace divkit {

/// SplitMix64 finalizer (Steele/Lea/Flood constants).
inline constexpr uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed derivation used everywhere randomness forks: batch b uses
/// mix_seed(master_seed, b), document d uses mix_seed(corpus_seed, d), and
/// so on. Keeps parallel generation order-independent: each work unit owns
/// a generator seeded from (parent seed, index) and never shares state.
inline constexpr uint64_t mix_seed(uint64_t master, uint64_t index) {
  return mix64(master + 0x9e3779b97f4a7c15ULL * (index + 1));
}

/// FNV-1a, used for content fingerprints (not for hashing into buckets).
inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// xoshiro256** with deterministic cross-platform draws. The standard
/// library distributions are implementation-defined, so every sampler the
/// toolkit relies on (uniform, normal, gamma, categorical) lives here.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t s = seed;
    for (auto& word : state_) {
      s += 0x9e3779b97f4a7c15ULL;
      word = mix64(s);
    }
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
  uint32_t uniform_u32(uint32_t n) {
    const uint64_t limit = (0x100000000ULL / n) * n;
    for (;;) {
      const uint64_t r = next_u64() >> 32;
      if (r < limit) return static_cast<uint32_t>(r % n);
    }
  }

  /// Standard normal via Box-Muller; caches the second draw.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - next_double();  // (0, 1], keeps log finite
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  /// Gamma(shape, 1) via Marsaglia-Tsang; shape < 1 boosted through the
  /// Gamma(shape + 1) identity.
  double gamma(double shape) {
    if (shape < 1.0) {
      const double u = next_double();
      return gamma(shape + 1.0) * std::pow(u > 0 ? u : 1e-300, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = next_double();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (u > 0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  /// Symmetric Dirichlet(alpha) over k components.
  std::vector<double> dirichlet(double alpha, size_t k) {
    std::vector<double> out(k);
    double total = 0.0;
    for (auto& g : out) {
      g = gamma(alpha);
      total += g;
    }
    if (total <= 0.0) {
      for (auto& g : out) g = 1.0 / static_cast<double>(k);
      return out;
    }
    for (auto& g : out) g /= total;
    return out;
  }

  /// Index draw from an (unnormalized is fine) probability vector.
  size_t categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = next_double() * total;
    for (size_t i = 0; i + 1 < weights.size(); ++i) {
      u -= weights[i];
      if (u < 0.0) return i;
    }
    return weights.size() - 1;
  }

 private:
  static constexpr uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  uint64_t state_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace divkit
