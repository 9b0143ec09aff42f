#pragma once

#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "simuq/errors.hpp"
#include "simuq/rng.hpp"

namespace simuq {

/// Latin hypercube sample on (0,1)^d: n points, each of the n equal-width
/// strata of every coordinate containing exactly one point. Strata are
/// assigned by independent Fisher-Yates permutations per column and the
/// point is jittered uniformly inside its cell.
inline Eigen::MatrixXd latin_hypercube(int n, int d, std::uint64_t seed) {
  if (n < 1 || d < 1)
    throw config_error("InvalidSize", "latin_hypercube needs n >= 1, d >= 1");
  rng stream(mix64(seed, 0x1a71ULL));
  Eigen::MatrixXd pts(n, d);
  std::vector<int> perm(n);
  for (int j = 0; j < d; ++j) {
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = n - 1; i > 0; --i) {
      const auto k = static_cast<int>(stream.below(static_cast<std::uint64_t>(i) + 1));
      std::swap(perm[i], perm[k]);
    }
    for (int i = 0; i < n; ++i)
      pts(i, j) = (perm[i] + stream.u01()) / static_cast<double>(n);
  }
  return pts;
}

}  // namespace simuq
