#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "simuq/design/design.hpp"
#include "simuq/errors.hpp"
#include "simuq/inputs/bootstrap.hpp"
#include "simuq/io.hpp"
#include "simuq/kriging/kriging.hpp"
#include "simuq/parallel.hpp"
#include "simuq/sim/simulator.hpp"

namespace simuq {

/// Equal-tail percentile interval from B values: 1-based order statistics
/// ceil(B alpha/2) and ceil(B (1 - alpha/2)). The ceilings are taken with a
/// 1e-9 absolute snap so binary representation error in alpha cannot bump an
/// exact integer boundary to the next order statistic (B = 1000,
/// alpha = 0.05 must give ranks 25 and 975).
inline std::pair<double, double> percentile_interval(std::vector<double> v,
                                                     double alpha) {
  const int b = static_cast<int>(v.size());
  if (b < 2)
    throw config_error("InvalidSize", "percentile interval needs >= 2 values");
  if (!(alpha > 0.0) || !(alpha < 1.0))
    throw config_error("InvalidConfig", "alpha must be in (0, 1)");
  auto rank = [b](double p) {
    int r = static_cast<int>(std::ceil(p * b - 1e-9));
    return std::clamp(r, 1, b);
  };
  const int lo = rank(alpha / 2.0);
  const int hi = rank(1.0 - alpha / 2.0);
  std::sort(v.begin(), v.end());
  return {v[lo - 1], v[hi - 1]};
}

struct uq_config {
  int k = 20;          ///< design points
  int budget = 2000;   ///< total simulation replications N (n = N/k per point)
  double q = 0.99;     ///< ellipsoid coverage quantile
  int B = 1000;        ///< bootstrap replicates
  double alpha = 0.05; ///< interval level
  std::uint64_t seed = 0;
  int threads = -1;    ///< -1: SIMUQ_THREADS / hardware default
  design_options design{};
  fit_options fit{};
};

/// Output of one uncertainty-quantification run.
///
/// ci0 is the percentile interval of the predictor means mu_b alone
/// (input-moment uncertainty only); ciplus is the percentile interval of the
/// posterior draws M_b (moment + metamodel uncertainty). The variance split:
///   sigma2_I  = var_b(mu_b)          input-model (moment) uncertainty
///   sigma2_M  = mean_b(sigma2_p,b)   metamodel uncertainty
///   sigma2_T  = var_b(M_b)           total, measured from the draws
/// ratio = sigma_I / sigma_T (a standard-deviation ratio). It is reported
/// unclamped; values above 1 are flagged by ratio_warning.
struct uq_result {
  double ci0_lo = 0.0, ci0_hi = 0.0;
  double ciplus_lo = 0.0, ciplus_hi = 0.0;
  double sigma2_I = 0.0, sigma2_M = 0.0, sigma2_T = 0.0;
  double ratio = 0.0;
  int B = 0;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  bool ratio_warning = false;

  // Per-replicate samples (CSV artifact; not part of the JSON summary).
  std::vector<double> mu_b, sigma2_p_b, m_b;

  json to_json() const {
    json j;
    j["ci0_lo"] = ci0_lo;
    j["ci0_hi"] = ci0_hi;
    j["ciplus_lo"] = ciplus_lo;
    j["ciplus_hi"] = ciplus_hi;
    j["sigma2_I"] = sigma2_I;
    j["sigma2_M"] = sigma2_M;
    j["sigma2_T"] = sigma2_T;
    j["ratio"] = ratio;
    j["B"] = B;
    j["alpha"] = alpha;
    j["seed"] = seed;
    return j;
  }

  std::string samples_csv() const {
    std::string out = "b,mu_b,sigma2_p_b,M_b\n";
    for (std::size_t i = 0; i < mu_b.size(); ++i)
      out += std::to_string(i + 1) + "," + fmt_double(mu_b[i]) + "," +
             fmt_double(sigma2_p_b[i]) + "," + fmt_double(m_b[i]) + "\n";
    return out;
  }
};

struct uq_artifacts {
  experiment_design design;
  design_summary summary;
  sk_model model;
  uq_result result;
};

namespace detail {

inline double sample_variance(const std::vector<double>& v) {
  const std::size_t n = v.size();
  if (n < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(n - 1);
}

}  // namespace detail

/// Runs the full pipeline: design the experiment over the bootstrap
/// uncertainty region, simulate, fit the metamodel, and propagate B fresh
/// bootstrap moment vectors through the fitted surface.
///
/// Substream derivation from cfg.seed (splitmix64-mixed phase keys):
///   phase 1 design, phase 2 simulation (one stream per design point),
///   phase 3 fit multistarts, phase 4 bootstrap (stream b = base + b),
///   phase 5 posterior draws (stream b = base + b).
/// Parallel loops assign work by index into preallocated slots, so results
/// are identical for any thread count.
inline uq_artifacts run_uq(const input_dataset& data,
                           const std::vector<model_spec>& specs,
                           const simulator& sim, const uq_config& cfg) {
  if (cfg.B < 2) throw config_error("InvalidSize", "need B >= 2");
  uq_artifacts art;

  // Phase 1: experiment design.
  art.design = make_design(data, specs, cfg.k, cfg.budget, cfg.q,
                           mix64(cfg.seed, 1), cfg.design);
  const int k = static_cast<int>(art.design.points.rows());
  const int n = art.design.n_per_point;

  // Phase 2: simulate (parallel over design points).
  art.summary.points = art.design.points;
  art.summary.means.resize(k);
  art.summary.vars.resize(k);
  art.summary.reps.assign(k, n);
  const std::uint64_t sim_base = mix64(cfg.seed, 2);
  parallel_for(
      k,
      [&](std::int64_t i) {
        std::vector<double> x(art.design.points.row(i).begin(),
                              art.design.points.row(i).end());
        const auto y = sim.simulate(x, n, mix64(sim_base, i));
        double mean = 0.0;
        for (double v : y) mean += v;
        mean /= n;
        double ss = 0.0;
        for (double v : y) ss += (v - mean) * (v - mean);
        art.summary.means(i) = mean;
        art.summary.vars(i) = n > 1 ? ss / (n - 1) : 0.0;
      },
      cfg.threads);

  // Phase 3: metamodel fit.
  fit_options fopt = cfg.fit;
  fopt.seed = mix64(cfg.seed, 3);
  art.model = sk_model::fit(art.summary, fopt);

  // Phase 4: bootstrap the input moments.
  const auto boot = bootstrap_moments(data, specs, cfg.B, mix64(cfg.seed, 4),
                                      cfg.design.policy);

  // Phase 5: propagate through the fitted surface.
  auto& res = art.result;
  res.B = cfg.B;
  res.alpha = cfg.alpha;
  res.seed = cfg.seed;
  res.mu_b.resize(cfg.B);
  res.sigma2_p_b.resize(cfg.B);
  res.m_b.resize(cfg.B);
  const std::uint64_t draw_base = mix64(cfg.seed, 5);
  parallel_for(
      cfg.B,
      [&](std::int64_t b) {
        const auto [mean, var] = art.model.predict(boot.draws[b]);
        rng stream(draw_base + static_cast<std::uint64_t>(b));
        res.mu_b[b] = mean;
        res.sigma2_p_b[b] = var;
        res.m_b[b] = mean + std::sqrt(var) * stream.normal();
      },
      cfg.threads);

  std::tie(res.ci0_lo, res.ci0_hi) = percentile_interval(res.mu_b, cfg.alpha);
  std::tie(res.ciplus_lo, res.ciplus_hi) =
      percentile_interval(res.m_b, cfg.alpha);
  res.sigma2_I = detail::sample_variance(res.mu_b);
  res.sigma2_T = detail::sample_variance(res.m_b);
  double s2m = 0.0;
  for (double v : res.sigma2_p_b) s2m += v;
  res.sigma2_M = s2m / cfg.B;
  res.ratio = res.sigma2_T > 0.0 ? std::sqrt(res.sigma2_I / res.sigma2_T) : 0.0;
  res.ratio_warning = res.ratio > 1.0;
  return art;
}

/// Fraction of B bootstrap moment vectors where `stable` is false. Used to
/// gauge how much probability the moment uncertainty puts on configurations
/// the metamodel cannot be trusted on (e.g. queueing inputs past saturation).
inline double unstable_fraction(
    const input_dataset& data, const std::vector<model_spec>& specs,
    const std::function<bool(const std::vector<double>&)>& stable, int B,
    std::uint64_t seed,
    degenerate_policy policy = degenerate_policy::redraw) {
  const auto boot = bootstrap_moments(data, specs, B, mix64(seed, 4), policy);
  int bad = 0;
  for (const auto& x : boot.draws)
    if (!stable(x)) ++bad;
  return static_cast<double>(bad) / static_cast<double>(B);
}

/// Plain direct-bootstrap reference: re-simulates n_d fresh replications at
/// every bootstrap moment vector and takes the percentile interval of the
/// replication means. Kept simple on purpose (benchmark baseline, not a
/// tuned method).
struct direct_result {
  double ci_lo = 0.0, ci_hi = 0.0;
  std::vector<double> means;
};

inline direct_result direct_bootstrap(const input_dataset& data,
                                      const std::vector<model_spec>& specs,
                                      const simulator& sim, int B, int n_d,
                                      double alpha, std::uint64_t seed,
                                      int threads = -1) {
  if (n_d < 1) throw config_error("InvalidSize", "need n_d >= 1");
  const auto boot = bootstrap_moments(data, specs, B, mix64(seed, 4));
  direct_result res;
  res.means.resize(B);
  const std::uint64_t sim_base = mix64(seed, 6);
  parallel_for(
      B,
      [&](std::int64_t b) {
        const auto y = sim.simulate(boot.draws[b], n_d, mix64(sim_base, b));
        double mean = 0.0;
        for (double v : y) mean += v;
        res.means[b] = mean / n_d;
      },
      threads);
  std::tie(res.ci_lo, res.ci_hi) = percentile_interval(res.means, alpha);
  return res;
}

}  // namespace simuq
