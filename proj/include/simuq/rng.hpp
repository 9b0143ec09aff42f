#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>

namespace simuq {

/// splitmix64 finalizer. Used to derive well-separated stream keys from a
/// base seed plus structured indices (phase ids, model ids, replicate
/// numbers). The constants are the standard splitmix64 ones.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
  return mix64(mix64(a) ^ (b + 0x9e3779b97f4a7c15ULL));
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return mix64(mix64(a, b), c);
}

/// FNV-1a hash of a string, for keying streams by model id.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seeded random stream.
///
/// Wraps std::mt19937_64 (whose output sequence is pinned bit-for-bit by the
/// C++ standard) and implements every variate transform explicitly, so that
/// identical seeds give byte-identical draws on any platform. None of the
/// std::*_distribution classes are used anywhere in the toolkit: their
/// algorithms are implementation-defined.
///
/// Consumption is sequential and documented per transform:
///   u01        1 engine call
///   normal     exactly 2 engine calls (Box-Muller, cosine branch)
///   gamma      variable (rejection), deterministic given the stream state
///   bernoulli  1 engine call
class rng {
 public:
  explicit rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t u64() { return gen_(); }

  /// Uniform on [0,1) with 53-bit resolution.
  double u01() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

  /// Uniform on (0,1]; safe as a log() argument.
  double u01_pos() {
    return static_cast<double>((u64() >> 11) + 1) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

  /// Standard normal via Box-Muller (cosine branch). Always consumes two
  /// engine calls, which keeps stream offsets easy to reason about.
  double normal() {
    const double u1 = u01_pos();
    const double u2 = u01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi_v<double> * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// Gamma(shape, scale) via Marsaglia-Tsang squeeze; shape < 1 is boosted
  /// through the Gamma(shape+1) * U^{1/shape} identity.
  double gamma(double shape, double scale) {
    if (shape < 1.0) {
      const double u = u01_pos();
      return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      const double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      const double u = u01_pos();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
      if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v))
        return d * v * scale;
    }
  }

  bool bernoulli(double p) { return u01() < p; }

  /// Uniform integer in [0, n) without modulo bias (Lemire multiply-shift).
  std::uint64_t below(std::uint64_t n) {
    using u128 = unsigned __int128;
    return static_cast<std::uint64_t>((u128(u64()) * u128(n)) >> 64);
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace simuq
