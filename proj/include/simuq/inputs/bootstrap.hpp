#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "simuq/errors.hpp"
#include "simuq/inputs/dataset.hpp"
#include "simuq/inputs/model.hpp"

namespace simuq {

/// What to do when a bootstrap resample is degenerate (all resampled values
/// identical, or a bernoulli proportion of exactly 0 or 1), which would put
/// the moment block outside the family's domain.
enum class degenerate_policy {
  redraw,  ///< redraw that model's resample, up to 100 attempts
  error    ///< throw numeric_error("DegenerateResample")
};

struct bootstrap_result {
  std::vector<std::vector<double>> draws;  ///< B moment vectors, layout order
  std::int64_t redraws = 0;                ///< degenerate resamples repaired
};

/// Nonparametric bootstrap of the input-model moments.
///
/// Replicate b uses the substream seeded with (base seed + b), so any prefix
/// of the replicate sequence is independent of B and replicates can be
/// generated in parallel or resumed without changing values. Within a
/// replicate, models are resampled in spec order: m_l indices drawn uniformly
/// with replacement, then the same moment estimators as estimate_moments.
inline bootstrap_result bootstrap_moments(
    const input_dataset& data, const std::vector<model_spec>& specs, int B,
    std::uint64_t seed, degenerate_policy policy = degenerate_policy::redraw) {
  if (B < 1) throw config_error("InvalidSize", "bootstrap needs B >= 1");
  const auto layout = block_layout::from(specs);

  // Validate once up front (also produces the right error for missing data).
  (void)estimate_moments(data, specs);

  bootstrap_result res;
  res.draws.assign(B, std::vector<double>(layout.total_dim, 0.0));

  std::vector<double> scratch;
  for (int b = 0; b < B; ++b) {
    rng stream(seed + static_cast<std::uint64_t>(b));
    for (std::size_t i = 0; i < specs.size(); ++i) {
      const auto& s = specs[i];
      if (s.fam == family::degenerate) continue;
      const auto& v = data.values(s.model_id);
      const std::size_t m = v.size();
      scratch.resize(m);
      double* out = res.draws[b].data() + layout.blocks[i].offset;
      for (int attempt = 0;; ++attempt) {
        for (std::size_t r = 0; r < m; ++r)
          scratch[r] = v[stream.below(m)];
        // All-identical resample: zero spread, and for bernoulli a
        // proportion of exactly 0 or 1.
        const auto [lo, hi] = std::minmax_element(scratch.begin(), scratch.end());
        const bool degenerate = (*lo == *hi);
        if (!degenerate) {
          detail::block_moments(s.fam, scratch, out);
          break;
        }
        if (policy == degenerate_policy::error)
          throw numeric_error("DegenerateResample",
                              "degenerate bootstrap resample for model '" +
                                  s.model_id + "'");
        ++res.redraws;
        if (attempt >= 99)
          throw numeric_error("ExhaustedRedraws",
                              "100 degenerate resamples in a row for model '" +
                                  s.model_id + "'");
      }
    }
  }
  return res;
}

}  // namespace simuq
