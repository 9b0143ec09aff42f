#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <numeric>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "simuq/errors.hpp"
#include "simuq/inputs/bootstrap.hpp"
#include "simuq/io.hpp"
#include "simuq/kriging/kriging.hpp"
#include "simuq/parallel.hpp"

namespace simuq {

/// Common-random-numbers table of bootstrap moment blocks for the
/// attribution game: entry (l, b) is model l's resampled moment block at
/// replicate b, drawn from the substream keyed
/// (base seed, fnv1a64(model_id), b). Every coalition reuses these same
/// blocks, so coalition costs differ only through membership, never through
/// sampling noise.
class sa_draw_table {
 public:
  sa_draw_table(const input_dataset& data, const std::vector<model_spec>& specs,
                int b_prime, std::uint64_t seed,
                degenerate_policy policy = degenerate_policy::redraw)
      : layout_(block_layout::from(specs)), b_prime_(b_prime) {
    if (b_prime < 2) throw config_error("InvalidSize", "need B' >= 2");
    baseline_ = estimate_moments(data, specs);
    blocks_.resize(specs.size());
    std::vector<double> scratch;
    for (std::size_t l = 0; l < specs.size(); ++l) {
      const auto& s = specs[l];
      const int dim = layout_.blocks[l].dim;
      blocks_[l].assign(static_cast<std::size_t>(b_prime) * dim, 0.0);
      if (s.fam == family::degenerate) continue;
      const auto& v = data.values(s.model_id);
      const std::size_t m = v.size();
      const std::uint64_t model_key = mix64(seed, fnv1a64(s.model_id));
      for (int b = 0; b < b_prime; ++b) {
        rng stream(model_key + static_cast<std::uint64_t>(b));
        scratch.resize(m);
        for (int attempt = 0;; ++attempt) {
          for (std::size_t r = 0; r < m; ++r) scratch[r] = v[stream.below(m)];
          const auto [lo, hi] =
              std::minmax_element(scratch.begin(), scratch.end());
          if (*lo != *hi) break;
          if (policy == degenerate_policy::error)
            throw numeric_error("DegenerateResample",
                                "degenerate resample for model '" +
                                    s.model_id + "'");
          if (attempt >= 99)
            throw numeric_error("ExhaustedRedraws",
                                "100 degenerate resamples for model '" +
                                    s.model_id + "'");
        }
        detail::block_moments(s.fam, scratch,
                              blocks_[l].data() + static_cast<std::size_t>(b) * dim);
      }
    }
  }

  int b_prime() const { return b_prime_; }
  int model_count() const { return static_cast<int>(blocks_.size()); }
  const std::vector<double>& baseline() const { return baseline_; }
  const block_layout& layout() const { return layout_; }

  /// Moment vector of replicate b for coalition `mask`: members take their
  /// replicate-b block, non-members stay at the observed point estimate.
  void assemble(std::uint32_t mask, int b, std::vector<double>& x) const {
    x = baseline_;
    for (std::size_t l = 0; l < blocks_.size(); ++l) {
      if (!(mask & (1u << l))) continue;
      const int dim = layout_.blocks[l].dim;
      if (dim == 0) continue;
      const double* src = blocks_[l].data() + static_cast<std::size_t>(b) * dim;
      std::copy(src, src + dim, x.begin() + layout_.blocks[l].offset);
    }
  }

 private:
  block_layout layout_;
  int b_prime_ = 0;
  std::vector<double> baseline_;
  std::vector<std::vector<double>> blocks_;  ///< per model: b_prime x dim
};

/// Coalition cost c(J): the variance (B'-1 divisor) over replicates of the
/// predictor mean when exactly the coalition's moment blocks vary. The empty
/// coalition costs exactly 0 by definition (no computation, no roundoff).
inline double estimate_cost(const sk_model& model, const sa_draw_table& table,
                            std::uint32_t mask) {
  if (mask == 0) return 0.0;
  const int bp = table.b_prime();
  std::vector<double> x;
  double mean = 0.0, m2 = 0.0;
  for (int b = 0; b < bp; ++b) {
    table.assemble(mask, b, x);
    const double v = model.predict_mean(x.data());
    const double delta = v - mean;
    mean += delta / (b + 1);
    m2 += delta * (v - mean);
  }
  return m2 / (bp - 1);
}

struct sa_config {
  int b_prime = 2000;
  bool exact = true;       ///< full 2^L enumeration (L <= 15) vs sampling
  int permutations = 200;  ///< permutation count in sampled mode
  std::uint64_t seed = 0;
  int threads = -1;
  degenerate_policy policy = degenerate_policy::redraw;
};

struct shapley_result {
  std::vector<std::string> model_ids;
  std::vector<double> s;      ///< Shapley values, model order
  std::vector<double> share;  ///< s / sum(s), zeros when the total is zero
  std::string mode;           ///< "exact" or "sampled"
  int b_prime = 0;
  std::uint64_t seed = 0;
  double total = 0.0;         ///< c(all models), the attributed variance

  json to_json() const {
    json j;
    json sj = json::object(), shj = json::object();
    for (std::size_t i = 0; i < model_ids.size(); ++i) {
      sj[model_ids[i]] = s[i];
      shj[model_ids[i]] = share[i];
    }
    j["s"] = sj;
    j["share"] = shj;
    j["mode"] = mode;
    j["B_prime"] = b_prime;
    j["seed"] = seed;
    return j;
  }

  std::string to_csv() const {
    std::string out = "model_id,s,share_percent\n";
    for (std::size_t i = 0; i < model_ids.size(); ++i)
      out += model_ids[i] + "," + fmt_double(s[i]) + "," +
             fmt_double(100.0 * share[i]) + "\n";
    return out;
  }
};

/// Shapley attribution of the input-uncertainty variance across models.
///
/// Exact mode enumerates all 2^L coalitions (L <= 15, otherwise
/// config_error("TooManyModels")) and applies the exact weights
/// (L-|J|-1)! |J|! / L!. Sampled mode averages marginal contributions along
/// random permutations (unbiased), memoizing coalition costs as they recur.
/// Both modes satisfy efficiency: sum_l s_l = c(all) - c(none).
inline shapley_result run_sa(const sk_model& model, const input_dataset& data,
                             const std::vector<model_spec>& specs,
                             const sa_config& cfg) {
  const int nm = static_cast<int>(specs.size());
  if (nm < 1) throw config_error("InvalidSize", "need at least one model");
  if (cfg.exact && nm > 15)
    throw config_error("TooManyModels",
                       "exact attribution supports at most 15 models (got " +
                           std::to_string(nm) + "); use sampled mode");
  if (block_layout::from(specs).total_dim != model.dim())
    throw config_error("InvalidMoments",
                       "model spec dimensions do not match the metamodel");

  const sa_draw_table table(data, specs, cfg.b_prime, cfg.seed, cfg.policy);

  shapley_result res;
  for (const auto& s : specs) res.model_ids.push_back(s.model_id);
  res.s.assign(nm, 0.0);
  res.mode = cfg.exact ? "exact" : "sampled";
  res.b_prime = cfg.b_prime;
  res.seed = cfg.seed;

  if (cfg.exact) {
    const std::uint32_t full = (1u << nm) - 1u;
    std::vector<double> cost(static_cast<std::size_t>(full) + 1, 0.0);
    parallel_for(
        static_cast<std::int64_t>(full) + 1,
        [&](std::int64_t mask) {
          cost[mask] = estimate_cost(model, table,
                                     static_cast<std::uint32_t>(mask));
        },
        cfg.threads);

    std::vector<double> fact(nm + 1, 1.0);
    for (int i = 1; i <= nm; ++i) fact[i] = fact[i - 1] * i;
    for (int l = 0; l < nm; ++l) {
      double s_l = 0.0;
      const std::uint32_t bit = 1u << l;
      for (std::uint32_t mask = 0; mask <= full; ++mask) {
        if (mask & bit) continue;
        const int j = std::popcount(mask);
        const double w = fact[nm - j - 1] * fact[j] / fact[nm];
        s_l += w * (cost[mask | bit] - cost[mask]);
      }
      res.s[l] = s_l;
    }
    res.total = cost[full];
  } else {
    std::unordered_map<std::uint32_t, double> memo;
    memo.emplace(0u, 0.0);
    auto cost_of = [&](std::uint32_t mask) {
      auto it = memo.find(mask);
      if (it != memo.end()) return it->second;
      const double c = estimate_cost(model, table, mask);
      memo.emplace(mask, c);
      return c;
    };
    rng perm_stream(mix64(cfg.seed, 0x9e23ULL));
    std::vector<int> order(nm);
    for (int p = 0; p < cfg.permutations; ++p) {
      std::iota(order.begin(), order.end(), 0);
      for (int i = nm - 1; i > 0; --i) {
        const int k = static_cast<int>(
            perm_stream.below(static_cast<std::uint64_t>(i) + 1));
        std::swap(order[i], order[k]);
      }
      std::uint32_t mask = 0;
      double prev = 0.0;
      for (int pos = 0; pos < nm; ++pos) {
        mask |= 1u << order[pos];
        const double cur = cost_of(mask);
        res.s[order[pos]] += (cur - prev) / cfg.permutations;
        prev = cur;
      }
    }
    res.total = cost_of((1u << nm) - 1u);
  }

  const double total_s = std::accumulate(res.s.begin(), res.s.end(), 0.0);
  res.share.assign(nm, 0.0);
  if (total_s != 0.0)
    for (int l = 0; l < nm; ++l) res.share[l] = res.s[l] / total_s;
  return res;
}

}  // namespace simuq
