#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "glossalign/matrix.hpp"

namespace glossalign {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Mixes extra words into a base seed so sub-streams (per epoch, per
/// instance, per tensor) are decorrelated but fully reproducible.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
  std::uint64_t s = base;
  splitmix64(s);
  s ^= a + 0x2545f4914f6cdd1dULL;
  splitmix64(s);
  s ^= b + 0x9e3779b97f4a7c15ULL;
  splitmix64(s);
  s ^= c + 0x94d049bb133111ebULL;
  return splitmix64(s);
}

/// Deterministic generator with hand-rolled distributions. The standard
/// library distributions are implementation-defined, which would break
/// bit-reproducibility of corpora and checkpoints across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {
    // warm up so nearby seeds diverge immediately
    splitmix64(state_);
  }

  std::uint64_t next_u64() { return splitmix64(state_); }

  /// Uniform in [0, 1) with 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in [0, n). Modulo bias is negligible for the n used here.
  std::uint64_t next_below(std::uint64_t n) { return n ? next_u64() % n : 0; }

  /// Standard normal via Box-Muller (no cached spare, so the stream is a
  /// pure function of call order).
  double next_gaussian() {
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Uniform point on the unit (dim-1)-sphere.
  Vec next_unit_vector(std::size_t dim) {
    Vec v(dim);
    double n = 0.0;
    do {
      for (auto& x : v) x = next_gaussian();
      n = norm2(v);
    } while (n <= 1e-12);
    for (auto& x : v) x /= n;
    return v;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace glossalign
