#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace dbrn {

// Counter-based generator: output i is the splitmix64 finalizer applied to
// seed + (i+1)*GAMMA. Any draw can be re-derived from (seed, index) alone,
// which is what makes the synthetic-data oracles reproducible bit-for-bit.
class CounterRng {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
  }

  // Deterministic sub-stream seeds, e.g. per component / per step / per sample.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    return mix(seed + kGamma * (stream + 1));
  }
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return derive(derive(seed, a), b);
  }

  std::uint64_t next_u64() { return mix(seed_ + (++counter_) * kGamma); }

  // uniform in [0, 1), 53-bit resolution
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // uniform in (0, 1); never hits an endpoint, safe under log()
  double next_double_open() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // uniform integer in [0, n); modulo reduction (documented format contract)
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  // Box-Muller over the counter stream; pairs are consumed in (cos, sin) order.
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = next_double_open();
    const double u2 = next_double_open();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // Fisher-Yates from the top index down.
  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(p[i - 1], p[j]);
    }
    return p;
  }

  // First k entries of a uniform random permutation of 0..n-1.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(next_below(n - i));
      std::swap(p[i], p[j]);
    }
    p.resize(k);
    return p;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace dbrn
