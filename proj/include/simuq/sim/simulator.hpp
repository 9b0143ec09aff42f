#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "simuq/errors.hpp"
#include "simuq/inputs/model.hpp"
#include "simuq/io.hpp"

namespace simuq {

/// A stochastic simulator driven by input-model moment vectors.
///
/// Implementations are pure: simulate() owns no hidden state, and replication
/// j of a call uses the substream derived from (seed, j), so distinct
/// replications are independent and any call is reproducible bit-for-bit
/// from its arguments.
class simulator {
 public:
  virtual ~simulator() = default;

  /// Expected input models, in moment-vector block order. Degenerate models
  /// appear here too (contributing no coordinates).
  virtual const std::vector<model_spec>& models() const = 0;

  /// n replications at moment vector x using base seed `seed`.
  virtual std::vector<double> simulate(const std::vector<double>& x, int n,
                                       std::uint64_t seed) const = 0;

  int dim() const { return block_layout::from(models()).total_dim; }

  void check_input(const std::vector<double>& x, int n) const {
    if (static_cast<int>(x.size()) != dim())
      throw config_error("InvalidMoments",
                         "moment vector has dimension " +
                             std::to_string(x.size()) + ", simulator expects " +
                             std::to_string(dim()));
    if (n < 1) throw config_error("InvalidSize", "need n >= 1 replications");
  }

  /// Truth moment vector assembled from the model specs.
  std::vector<double> truth() const { return truth_moments(models()); }
};

}  // namespace simuq
