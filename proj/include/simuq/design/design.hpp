#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include <Eigen/Core>

#include "simuq/errors.hpp"
#include "simuq/inputs/bootstrap.hpp"
#include "simuq/io.hpp"
#include "simuq/numkit/latin_hypercube.hpp"
#include "simuq/numkit/special.hpp"
#include "simuq/numkit/spd.hpp"

namespace simuq {

/// Region { x : (x - center)' shape^-1 (x - center) <= radius2 }.
struct ellipsoid {
  Eigen::VectorXd center;
  Eigen::MatrixXd shape;    ///< SPD scatter matrix (sample covariance)
  double radius2 = 0.0;
  Eigen::MatrixXd chol_lower;  ///< L with shape = L L', cached for sampling

  double mahal2(const double* x) const {
    const Eigen::Map<const Eigen::VectorXd> xv(x, center.size());
    const Eigen::VectorXd diff = xv - center;
    // Solve L z = diff; |z|^2 is the Mahalanobis square.
    const Eigen::VectorXd z =
        chol_lower.triangularView<Eigen::Lower>().solve(diff);
    return z.squaredNorm();
  }

  bool contains(const double* x) const { return mahal2(x) <= radius2; }

  int dim() const { return static_cast<int>(center.size()); }
};

/// Fits the smallest-q ellipsoid around bootstrap moment samples: center is
/// the sample mean, shape the sample covariance (jittered by 1e-12 on the
/// diagonal, which keeps coordinates with no resampling spread - e.g.
/// bernoulli blocks of tiny samples - from making it singular), and radius2
/// the empirical q-quantile (ceil(q n) order statistic) of the samples'
/// squared Mahalanobis distances, so at least ceil(q n) samples are covered.
inline ellipsoid build_ellipsoid(const std::vector<std::vector<double>>& samples,
                                 double q) {
  if (samples.empty())
    throw config_error("TooFewSamples", "no samples given");
  const int d = static_cast<int>(samples[0].size());
  const int n = static_cast<int>(samples.size());
  if (n < d + 2)
    throw config_error("TooFewSamples",
                       "need at least d + 2 = " + std::to_string(d + 2) +
                           " samples, got " + std::to_string(n));
  if (!(q > 0.0) || q > 1.0)
    throw config_error("InvalidConfig", "quantile q must be in (0, 1]");

  ellipsoid e;
  e.center = Eigen::VectorXd::Zero(d);
  for (const auto& s : samples)
    e.center += Eigen::Map<const Eigen::VectorXd>(s.data(), d);
  e.center /= n;

  e.shape = Eigen::MatrixXd::Zero(d, d);
  for (const auto& s : samples) {
    const Eigen::VectorXd diff =
        Eigen::Map<const Eigen::VectorXd>(s.data(), d) - e.center;
    e.shape.noalias() += diff * diff.transpose();
  }
  e.shape /= (n - 1);
  e.shape.diagonal().array() += 1e-12;

  try {
    const spd_factor f = spd_factorize(e.shape);
    e.chol_lower = f.llt.matrixL();
    if (f.jitter > 0.0) e.shape.diagonal().array() += f.jitter;
  } catch (const numeric_error&) {
    throw numeric_error("SingularCovariance",
                        "bootstrap sample covariance is singular");
  }

  std::vector<double> d2(n);
  for (int i = 0; i < n; ++i) d2[i] = e.mahal2(samples[i].data());
  const int kth = static_cast<int>(std::ceil(q * n - 1e-9));  // 1-based
  std::nth_element(d2.begin(), d2.begin() + (kth - 1), d2.end());
  e.radius2 = d2[kth - 1];
  return e;
}

/// Sequential acceptance plan for checking that an ellipsoid still covers
/// fraction q_null of fresh bootstrap resamples.
///
/// Chooses the smallest fresh-batch size b1 (with its threshold c) such that
/// for X ~ Binomial(b1, p):
///   reject when X <= c,
///   P(X <= c | p = q_null) <= type1   and   P(X <= c | p = q_alt) >= power.
struct coverage_plan {
  int b1 = 0;
  int c = 0;
  double type1 = 0.0;  ///< achieved false-rejection probability at q_null
  double power = 0.0;  ///< achieved rejection probability at q_alt
};

inline coverage_plan coverage_test_plan(double q_null = 0.99,
                                        double q_alt = 0.97,
                                        double type1 = 0.005,
                                        double power = 0.95) {
  if (!(q_alt < q_null) || !(q_null < 1.0) || !(q_alt > 0.0))
    throw config_error("InvalidConfig",
                       "coverage plan needs 0 < q_alt < q_null < 1");
  for (int b1 = 1; b1 <= 100000; ++b1) {
    // Smallest c with enough power; then check the type-I constraint.
    int lo = 0, hi = b1;
    while (lo < hi) {
      const int mid = (lo + hi) / 2;
      if (binomial_cdf(mid, b1, q_alt) >= power)
        hi = mid;
      else
        lo = mid + 1;
    }
    const int c = lo;
    if (binomial_cdf(c, b1, q_alt) < power) continue;
    const double a = binomial_cdf(c, b1, q_null);
    if (a <= type1) {
      return {b1, c, a, binomial_cdf(c, b1, q_alt)};
    }
  }
  throw numeric_error("DidNotStabilize", "no feasible coverage plan found");
}

/// Refinement rule of the sequential check: refine when at most c of the
/// fresh resamples are contained.
inline bool coverage_rejects(int contained, const coverage_plan& plan) {
  return contained <= plan.c;
}

/// Uniform sample inside an ellipsoid that preserves Latin-hypercube
/// stratification: an LHS on (0,1)^d is pushed through the inverse CDFs of
/// the polar factorization of the uniform unit ball
///   radius:     r = u^(1/d)
///   angles:     phi_j ~ density sin^(d-1-j), j = 1..d-2  (inverse via
///               the incomplete-beta representation)
///   last angle: 2 pi u
/// and the ball is mapped affinely by center + sqrt(radius2) * L. In one
/// dimension the ball is [-1, 1] and the map is x = 2u - 1.
inline Eigen::MatrixXd uniform_in_ellipsoid(const ellipsoid& e, int n,
                                            std::uint64_t seed) {
  const int d = e.dim();
  if (n < 1) throw config_error("InvalidSize", "need n >= 1 points");
  const Eigen::MatrixXd u = latin_hypercube(n, d, mix64(seed, 0xba11ULL));
  Eigen::MatrixXd pts(n, d);
  Eigen::VectorXd w(d);
  const double radius = std::sqrt(e.radius2);
  for (int i = 0; i < n; ++i) {
    if (d == 1) {
      w(0) = 2.0 * u(i, 0) - 1.0;
    } else {
      const double r = std::pow(u(i, 0), 1.0 / d);
      // Angles phi_1..phi_{d-1}; the first d-2 have sin-power densities,
      // the last is uniform on [0, 2 pi).
      double sin_prod = 1.0;
      for (int j = 0; j < d - 2; ++j) {
        const double phi =
            sin_power_quantile(static_cast<double>(d - 2 - j), u(i, j + 1));
        w(j) = r * sin_prod * std::cos(phi);
        sin_prod *= std::sin(phi);
      }
      const double last = 2.0 * std::numbers::pi_v<double> * u(i, d - 1);
      w(d - 2) = r * sin_prod * std::cos(last);
      w(d - 1) = r * sin_prod * std::sin(last);
    }
    pts.row(i) =
        (e.center + radius * (e.chol_lower * w)).transpose();
  }
  return pts;
}

struct design_options {
  int b0 = 1000;        ///< initial bootstrap pool size
  int max_rounds = 10;  ///< refinement rounds before giving up
  double q_alt = 0.97;
  double type1 = 0.005;
  double power = 0.95;
  degenerate_policy policy = degenerate_policy::redraw;
};

/// Where the design came from: everything needed to audit or replay it.
struct design_provenance {
  std::uint64_t seed = 0;
  double q = 0.0;
  int b0 = 0;
  coverage_plan plan;
  std::vector<int> contained;  ///< per round, out of plan.b1
  int rounds = 0;
  int domain_rejected = 0;  ///< sampled points outside the family domains
};

/// A simulation experiment design: k points with a common replication count.
struct experiment_design {
  Eigen::MatrixXd points;  ///< k x d
  int n_per_point = 0;
  ellipsoid region;
  design_provenance prov;

  json to_json() const {
    json j;
    json pts = json::array();
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      json row = json::array();
      for (Eigen::Index l = 0; l < points.cols(); ++l)
        row.push_back(points(i, l));
      pts.push_back(row);
    }
    j["points"] = pts;
    j["n_per_point"] = n_per_point;
    json ell;
    ell["center"] = std::vector<double>(region.center.data(),
                                        region.center.data() +
                                            region.center.size());
    json shape = json::array();
    for (Eigen::Index i = 0; i < region.shape.rows(); ++i) {
      json row = json::array();
      for (Eigen::Index l = 0; l < region.shape.cols(); ++l)
        row.push_back(region.shape(i, l));
      shape.push_back(row);
    }
    ell["shape"] = shape;
    ell["radius2"] = region.radius2;
    j["ellipsoid"] = ell;
    j["provenance"] = {{"seed", prov.seed},
                       {"q", prov.q},
                       {"B0", prov.b0},
                       {"coverage_b1", prov.plan.b1},
                       {"coverage_c", prov.plan.c},
                       {"rounds", prov.rounds},
                       {"contained", prov.contained},
                       {"domain_rejected", prov.domain_rejected}};
    return j;
  }
};

/// Builds an experiment design for the moment-uncertainty region of the
/// dataset:
///   1. bootstrap b0 moment vectors and fit the covering ellipsoid;
///   2. check it against a fresh batch of plan.b1 resamples; while at most
///      plan.c are contained, merge the batch into the pool and refit
///      (at most max_rounds times, then numeric_error("DidNotStabilize"));
///   3. place k space-filling points uniformly in the accepted ellipsoid
///      with floor(N / k) replications each.
///
/// Simulation is only defined where every input family can realize its
/// moment block (std > 0, bernoulli p in [0,1], ...). The ellipsoid is a
/// smooth cover of the bootstrap cloud and can bulge past those domains
/// when the data are short, so sampled points outside them are rejected
/// and redrawn; the kept points are uniform on the intersection of the
/// ellipsoid with the realizable region.
inline experiment_design make_design(const input_dataset& data,
                                     const std::vector<model_spec>& specs,
                                     int k, int N, double q,
                                     std::uint64_t seed,
                                     const design_options& opt = {}) {
  if (k < 2) throw config_error("InvalidSize", "need k >= 2 design points");
  if (N < 2 * k)
    throw config_error("InvalidSize",
                       "budget N must allow >= 2 replications per point");

  experiment_design dsg;
  dsg.prov.seed = seed;
  dsg.prov.q = q;
  dsg.prov.b0 = opt.b0;
  dsg.prov.plan = coverage_test_plan(q, opt.q_alt, opt.type1, opt.power);

  auto pool = bootstrap_moments(data, specs, opt.b0, mix64(seed, 0xb001ULL),
                                opt.policy)
                  .draws;
  bool accepted = false;
  for (int round = 1; round <= opt.max_rounds; ++round) {
    dsg.region = build_ellipsoid(pool, q);
    const auto fresh =
        bootstrap_moments(data, specs, dsg.prov.plan.b1,
                          mix64(seed, 0xc0feULL, static_cast<std::uint64_t>(round)),
                          opt.policy)
            .draws;
    int contained = 0;
    for (const auto& s : fresh)
      if (dsg.region.contains(s.data())) ++contained;
    dsg.prov.contained.push_back(contained);
    dsg.prov.rounds = round;
    if (!coverage_rejects(contained, dsg.prov.plan)) {
      accepted = true;
      break;
    }
    pool.insert(pool.end(), fresh.begin(), fresh.end());
  }
  if (!accepted)
    throw numeric_error("DidNotStabilize",
                        "ellipsoid failed the coverage check in " +
                            std::to_string(opt.max_rounds) + " rounds");

  const int d = dsg.region.dim();
  dsg.points.resize(k, d);
  int kept = 0;
  const int max_attempts = 100;
  for (int attempt = 0; attempt < max_attempts && kept < k; ++attempt) {
    const Eigen::MatrixXd batch = uniform_in_ellipsoid(
        dsg.region, k, mix64(seed, 0x9075ULL, static_cast<std::uint64_t>(attempt)));
    for (int i = 0; i < k && kept < k; ++i) {
      const Eigen::VectorXd row = batch.row(i);
      if (moments_in_domain(specs, row.data()))
        dsg.points.row(kept++) = row;
      else
        ++dsg.prov.domain_rejected;
    }
  }
  if (kept < k)
    throw numeric_error("ExhaustedRedraws",
                        "could not place " + std::to_string(k) +
                            " realizable design points in " +
                            std::to_string(max_attempts) + " batches");
  dsg.n_per_point = N / k;
  return dsg;
}

}  // namespace simuq
