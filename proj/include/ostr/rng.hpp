#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace ostr {

// splitmix64 mixing step, used to derive independent stream seeds from a
// base seed plus a salt (sample index, parameter name hash, step, ...).
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_str(const std::string& s) {
  // FNV-1a
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Deterministic RNG. The engine is the standard-specified mt19937_64; the
// distributions are hand-rolled so byte streams do not depend on the
// standard library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // [0,1) with 53 random bits
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // inclusive range, unbiased via rejection
  int uniform_int(int lo, int hi) {
    assert(hi >= lo);
    std::uint64_t span = static_cast<std::uint64_t>(hi) - lo + 1;
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t r;
    do {
      r = next_u64();
    } while (r >= limit);
    return lo + static_cast<int>(r % span);
  }

  // Box-Muller; one value per call, the second is discarded for simplicity
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      int j = uniform_int(0, i);
      std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(j)]);
    }
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace ostr
