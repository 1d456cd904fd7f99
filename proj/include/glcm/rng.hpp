#ifndef GLCM_RNG_HPP
#define GLCM_RNG_HPP

// Counter-based random numbers. Every draw is a pure function of (key, counter),
// so a given step's noise does not depend on what was drawn before it.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace glcm {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ mix64(b + 0x632be59bd9b4e019ULL));
}

// Uniform in [0,1) with 53 random bits.
constexpr double to_unit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Stateless Gaussian stream keyed by a 64-bit value.
class NoiseStream {
public:
  constexpr explicit NoiseStream(std::uint64_t key) : key_(key) {}

  constexpr std::uint64_t key() const { return key_; }
  NoiseStream substream(std::uint64_t tag) const { return NoiseStream(hash_combine(key_, tag)); }

  std::uint64_t bits(std::uint64_t counter) const { return hash_combine(key_, counter); }
  double uniform(std::uint64_t counter) const { return to_unit(bits(counter)); }

  // Standard normal draw number `i` (Box-Muller, cosine branch).
  double normal(std::uint64_t i) const {
    const double u1 = 1.0 - uniform(2 * i);  // (0,1]
    const double u2 = uniform(2 * i + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  void fill_normal(std::span<double> out) const {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = normal(i);
  }

private:
  std::uint64_t key_;
};

// Sequential generator built on the same hash; used where draws are consumed in order
// (training batches, shuffles).
class Rng {
public:
  explicit Rng(std::uint64_t seed) : stream_(mix64(seed)) {}

  std::uint64_t next_u64() { return stream_.bits(counter_++); }
  double uniform() { return to_unit(next_u64()); }
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  // Uniform integer in [lo, hi].
  int uniform_int(int lo, int hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

private:
  NoiseStream stream_;
  std::uint64_t counter_ = 0;
};

}  // namespace glcm

#endif  // GLCM_RNG_HPP
