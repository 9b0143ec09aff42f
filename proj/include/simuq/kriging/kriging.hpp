#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Core>

#include "simuq/errors.hpp"
#include "simuq/io.hpp"
#include "simuq/numkit/nelder_mead.hpp"
#include "simuq/numkit/spd.hpp"
#include "simuq/rng.hpp"

namespace simuq {

/// Simulation results at the design points: k points in d dimensions with
/// replication means, replication variances (n-1 divisor) and replication
/// counts. `vars` may be identically zero for noise-free data.
struct design_summary {
  Eigen::MatrixXd points;  ///< k x d
  Eigen::VectorXd means;   ///< k
  Eigen::VectorXd vars;    ///< k, per-replication sample variance S^2(x_i)
  std::vector<int> reps;   ///< k, replications n_i per point

  int k() const { return static_cast<int>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }

  void validate() const {
    if (points.rows() < 2)
      throw config_error("InvalidSize", "need at least 2 design points");
    if (means.size() != points.rows() || vars.size() != points.rows() ||
        static_cast<Eigen::Index>(reps.size()) != points.rows())
      throw config_error("InvalidSize", "design summary sizes disagree");
    for (Eigen::Index i = 0; i < vars.size(); ++i) {
      if (vars(i) < 0.0)
        throw config_error("InvalidSize", "negative replication variance");
      if (reps[i] < 1)
        throw config_error("InvalidSize", "replication count must be >= 1");
    }
  }
};

/// Anisotropic squared-exponential correlation
///   r(x, y) = exp(-sum_j theta_j (x_j - y_j)^2).
inline double gaussian_correlation(const double* x, const double* y,
                                   const double* theta, int d) {
  double s = 0.0;
  for (int j = 0; j < d; ++j) {
    const double dx = x[j] - y[j];
    s += theta[j] * dx * dx;
  }
  return std::exp(-s);
}

struct fit_options {
  int multistarts = 5;        ///< optimizer launches (1 deterministic + jittered)
  std::uint64_t seed = 0x5eedULL;  ///< multistart jitter stream
  nm_options nm{};                 ///< inner Nelder-Mead settings
};

/// Stochastic kriging metamodel of a simulation response surface.
///
/// Fitted on replication means with heteroscedastic sampling noise
/// C = diag(S^2(x_i) / n_i). The constant trend beta0 is profiled out by GLS
/// and (tau^2, theta) are chosen by maximum likelihood in log space, with
/// theta constrained to [1e-6, 1e4].
///
/// Prediction at x (with r = tau^2 * correlation vector, M = Sigma + C):
///   mean(x) = beta0 + r' M^-1 (ybar - beta0 1)
///   var(x)  = tau^2 - r' M^-1 r + eta^2 / (1' M^-1 1),  eta = 1 - 1' M^-1 r
/// The eta term propagates the uncertainty of the estimated trend. Negative
/// variances within -1e-12 (roundoff at interpolation) clamp to zero.
class sk_model {
 public:
  double beta0 = 0.0;
  double tau2 = 1.0;
  Eigen::VectorXd theta;   ///< d
  Eigen::VectorXd c_diag;  ///< k, S^2(x_i)/n_i
  design_summary design;
  double loglik = 0.0;     ///< maximized Gaussian log likelihood
  double jitter = 0.0;     ///< diagonal jitter applied to Sigma + C, if any

  static constexpr double theta_min = 1e-6;
  static constexpr double theta_max = 1e4;

  /// Maximum-likelihood fit. Start 0 uses theta_j = 1/range_j^2 and
  /// tau^2 = var(ybar); remaining starts jitter both in log space.
  static sk_model fit(const design_summary& ds, const fit_options& opt = {}) {
    ds.validate();
    const int k = ds.k(), d = ds.dim();
    if (opt.multistarts < 1)
      throw config_error("InvalidSize", "multistarts must be >= 1");

    Eigen::VectorXd c(k);
    for (int i = 0; i < k; ++i) c(i) = ds.vars(i) / ds.reps[i];

    const double ybar_mean = ds.means.mean();
    double yvar = 0.0;
    for (int i = 0; i < k; ++i)
      yvar += (ds.means(i) - ybar_mean) * (ds.means(i) - ybar_mean);
    yvar /= (k - 1);
    const double tau2_floor = 1e-12 * (1.0 + ybar_mean * ybar_mean);
    const double tau2_init = std::max(yvar, tau2_floor);

    Eigen::VectorXd theta_init(d);
    for (int j = 0; j < d; ++j) {
      const double range =
          ds.points.col(j).maxCoeff() - ds.points.col(j).minCoeff();
      theta_init(j) = range > 0.0 ? 1.0 / (range * range) : 1.0;
      theta_init(j) = std::clamp(theta_init(j), theta_min, theta_max);
    }

    // Optimization variables z = (log tau2, log theta_1..d), bounds enforced
    // by clamping inside the objective (out-of-range proposals are projected).
    const double log_t2_lo = std::log(tau2_floor);
    const double log_t2_hi = std::log(std::max(1e6 * tau2_init, 1e-6));
    auto clamp_z = [&](Eigen::VectorXd z) {
      z(0) = std::clamp(z(0), log_t2_lo, log_t2_hi);
      for (int j = 0; j < d; ++j)
        z(j + 1) = std::clamp(z(j + 1), std::log(theta_min), std::log(theta_max));
      return z;
    };

    auto neg_loglik = [&](const Eigen::VectorXd& z_raw) -> double {
      const Eigen::VectorXd z = clamp_z(z_raw);
      const double t2 = std::exp(z(0));
      Eigen::MatrixXd m(k, k);
      for (int i = 0; i < k; ++i) {
        m(i, i) = t2 + c(i);
        for (int j = i + 1; j < k; ++j) {
          double s = 0.0;
          for (int l = 0; l < d; ++l) {
            const double dx = ds.points(i, l) - ds.points(j, l);
            s += std::exp(z(l + 1)) * dx * dx;
          }
          m(i, j) = m(j, i) = t2 * std::exp(-s);
        }
      }
      try {
        const spd_factor f = spd_factorize(m);
        const Eigen::VectorXd minv_y = f.solve(ds.means);
        const Eigen::VectorXd minv_1 = f.solve(Eigen::VectorXd::Ones(k));
        const double denom = minv_1.sum();
        if (!(denom > 0.0)) return std::numeric_limits<double>::infinity();
        const double b0 = minv_y.sum() / denom;
        const Eigen::VectorXd resid = ds.means.array() - b0;
        const double quad = resid.dot(f.solve(resid));
        return 0.5 * (f.log_det + quad +
                      k * std::log(2.0 * std::numbers::pi_v<double>));
      } catch (const numeric_error&) {
        return std::numeric_limits<double>::infinity();
      }
    };

    Eigen::VectorXd z0(d + 1);
    z0(0) = std::log(tau2_init);
    for (int j = 0; j < d; ++j) z0(j + 1) = std::log(theta_init(j));

    nm_report best;
    rng jitter_stream(mix64(opt.seed, 0xf17ULL));
    for (int s = 0; s < opt.multistarts; ++s) {
      Eigen::VectorXd zs = z0;
      if (s > 0) {
        // log10 perturbations: tau2 within 10^+-1, theta within 10^+-2.
        zs(0) += std::numbers::ln10_v<double> * jitter_stream.uniform(-1.0, 1.0);
        for (int j = 0; j < d; ++j)
          zs(j + 1) +=
              std::numbers::ln10_v<double> * jitter_stream.uniform(-2.0, 2.0);
        zs = clamp_z(zs);
      }
      nm_options nmo = opt.nm;
      const nm_report rep = nelder_mead(neg_loglik, zs, nmo);
      if (s == 0 || rep.fx < best.fx) best = rep;
    }

    const Eigen::VectorXd z_opt = clamp_z(best.x);
    sk_model model;
    model.design = ds;
    model.c_diag = c;
    model.tau2 = std::exp(z_opt(0));
    model.theta.resize(d);
    for (int j = 0; j < d; ++j) model.theta(j) = std::exp(z_opt(j + 1));
    model.loglik = -best.fx;
    model.rebuild();
    return model;
  }

  /// Recomputes the cached factorization and GLS trend from the stored
  /// parameters. Called by fit() and after deserialization.
  void rebuild() {
    design.validate();
    const int k = design.k(), d = design.dim();
    if (theta.size() != d || c_diag.size() != k)
      throw config_error("InvalidSize", "model parameter sizes disagree");
    Eigen::MatrixXd m(k, k);
    for (int i = 0; i < k; ++i) {
      m(i, i) = tau2 + c_diag(i);
      for (int j = i + 1; j < k; ++j) {
        double s = 0.0;
        for (int l = 0; l < d; ++l) {
          const double dx = design.points(i, l) - design.points(j, l);
          s += theta(l) * dx * dx;
        }
        m(i, j) = m(j, i) = tau2 * std::exp(-s);
      }
    }
    const spd_factor f = spd_factorize(m);
    jitter = f.jitter;
    minv_ones_ = f.solve(Eigen::VectorXd::Ones(k));
    ones_minv_ones_ = minv_ones_.sum();
    if (!(ones_minv_ones_ > 0.0))
      throw numeric_error("NotPositiveDefinite", "degenerate GLS denominator");
    beta0 = minv_ones_.dot(design.means) / ones_minv_ones_;
    const Eigen::VectorXd resid = design.means.array() - beta0;
    alpha_ = f.solve(resid);
    factor_ = f;
  }

  /// Posterior mean at x (x has design dimension). Thread-safe: prediction
  /// only reads the cached factorization.
  double predict_mean(const double* x) const {
    double mean = beta0;
    const int k = design.k(), d = design.dim();
    for (int i = 0; i < k; ++i) {
      double s = 0.0;
      for (int l = 0; l < d; ++l) {
        const double dx = x[l] - design.points(i, l);
        s += theta(l) * dx * dx;
      }
      mean += tau2 * std::exp(-s) * alpha_(i);
    }
    return mean;
  }

  /// Posterior mean and variance at x.
  std::pair<double, double> predict(const double* x) const {
    const Eigen::VectorXd r = corr_vector(x);
    const double mean = beta0 + r.dot(alpha_);
    const Eigen::VectorXd minv_r = factor_.solve(r);
    const double eta = 1.0 - minv_ones_.dot(r);
    double var = tau2 - r.dot(minv_r) + eta * eta / ones_minv_ones_;
    if (var < 0.0) var = 0.0;  // roundoff guard; exact at -1e-12 scale
    return {mean, var};
  }

  double predict_var(const double* x) const { return predict(x).second; }

  double predict_mean(const std::vector<double>& x) const {
    check_dim(x);
    return predict_mean(x.data());
  }
  std::pair<double, double> predict(const std::vector<double>& x) const {
    check_dim(x);
    return predict(x.data());
  }

  /// One draw from the posterior surface distribution at x.
  double sample_posterior(const double* x, rng& stream) const {
    const auto [mean, var] = predict(x);
    return mean + std::sqrt(var) * stream.normal();
  }

  json to_json() const {
    json j;
    j["beta0"] = beta0;
    j["tau2"] = tau2;
    j["theta"] = std::vector<double>(theta.data(), theta.data() + theta.size());
    j["c_diag"] =
        std::vector<double>(c_diag.data(), c_diag.data() + c_diag.size());
    json pts = json::array();
    for (int i = 0; i < design.k(); ++i) {
      json row = json::array();
      for (int l = 0; l < design.dim(); ++l) row.push_back(design.points(i, l));
      pts.push_back(row);
    }
    j["design"] = {{"points", pts},
                   {"means", std::vector<double>(design.means.data(),
                                                 design.means.data() +
                                                     design.means.size())},
                   {"vars", std::vector<double>(design.vars.data(),
                                                design.vars.data() +
                                                    design.vars.size())},
                   {"reps", design.reps}};
    j["loglik"] = loglik;
    return j;
  }

  static sk_model from_json(const json& j) {
    sk_model m;
    try {
      m.beta0 = j.at("beta0").get<double>();
      m.tau2 = j.at("tau2").get<double>();
      const auto th = j.at("theta").get<std::vector<double>>();
      m.theta = Eigen::Map<const Eigen::VectorXd>(th.data(), th.size());
      const auto cd = j.at("c_diag").get<std::vector<double>>();
      m.c_diag = Eigen::Map<const Eigen::VectorXd>(cd.data(), cd.size());
      const auto& dj = j.at("design");
      const auto& pts = dj.at("points");
      const int k = static_cast<int>(pts.size());
      const int d = k > 0 ? static_cast<int>(pts.at(0).size()) : 0;
      m.design.points.resize(k, d);
      for (int i = 0; i < k; ++i)
        for (int l = 0; l < d; ++l)
          m.design.points(i, l) = pts.at(i).at(l).get<double>();
      const auto means = dj.at("means").get<std::vector<double>>();
      m.design.means = Eigen::Map<const Eigen::VectorXd>(means.data(), means.size());
      const auto vars = dj.at("vars").get<std::vector<double>>();
      m.design.vars = Eigen::Map<const Eigen::VectorXd>(vars.data(), vars.size());
      m.design.reps = dj.at("reps").get<std::vector<int>>();
      m.loglik = j.value("loglik", 0.0);
    } catch (const nlohmann::json::exception& e) {
      throw config_error("InvalidConfig", std::string("bad model JSON: ") + e.what());
    }
    m.rebuild();
    return m;
  }

  int dim() const { return static_cast<int>(theta.size()); }

  void check_dim(const std::vector<double>& x) const {
    if (static_cast<int>(x.size()) != dim())
      throw config_error("InvalidMoments",
                         "point has dimension " + std::to_string(x.size()) +
                             ", model expects " + std::to_string(dim()));
  }

 private:
  Eigen::VectorXd corr_vector(const double* x) const {
    const int k = design.k(), d = design.dim();
    Eigen::VectorXd r(k);
    for (int i = 0; i < k; ++i) {
      double s = 0.0;
      for (int l = 0; l < d; ++l) {
        const double dx = x[l] - design.points(i, l);
        s += theta(l) * dx * dx;
      }
      r(i) = tau2 * std::exp(-s);
    }
    return r;
  }

  spd_factor factor_;
  Eigen::VectorXd alpha_;      ///< M^-1 (ybar - beta0 1)
  Eigen::VectorXd minv_ones_;  ///< M^-1 1
  double ones_minv_ones_ = 0.0;
};

}  // namespace simuq
