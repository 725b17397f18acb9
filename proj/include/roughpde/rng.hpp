#pragma once
// Counter-based Gaussian sampling. Every variate is a pure function of
// (master seed, purpose tag, sample index, counter), so fields are
// bit-reproducible regardless of evaluation order or thread schedule.

#include <cmath>
#include <cstdint>
#include <string_view>

namespace roughpde {

struct SeedSpec {
  std::uint64_t master_seed = 0;
  std::uint64_t sample_index = 0;
  std::string_view purpose = "noise";
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace detail

class CounterRng {
 public:
  explicit CounterRng(const SeedSpec& seed) {
    std::uint64_t k = detail::splitmix64(seed.master_seed);
    k = detail::splitmix64(k ^ detail::fnv1a(seed.purpose));
    key_ = detail::splitmix64(k ^ (seed.sample_index * 0xD1B54A32D192ED03ULL + 1));
  }

  double uniform(std::uint64_t counter) const {
    std::uint64_t x = detail::splitmix64(key_ + counter * 0x9E3779B97F4A7C15ULL);
    // 53-bit mantissa, shifted into (0,1] so log() below is always finite.
    return (static_cast<double>(x >> 11) + 1.0) * 0x1p-53;
  }

  // Box-Muller pair from counters (2c, 2c+1); each is standard normal.
  void gaussian_pair(std::uint64_t c, double& g1, double& g2) const {
    double u1 = uniform(2 * c);
    double u2 = uniform(2 * c + 1);
    double r = std::sqrt(-2.0 * std::log(u1));
    double th = 6.28318530717958647692528676655900577 * u2;
    g1 = r * std::cos(th);
    g2 = r * std::sin(th);
  }

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
};

}  // namespace roughpde
