#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Core>

#include "simuq/errors.hpp"

namespace simuq {

struct nm_options {
  int max_iters = 2000;      ///< reflection steps per restart
  double tol = 1e-10;        ///< relative f-spread convergence threshold
  int restarts = 2;          ///< simplex re-initializations around the best point
  double init_step = 0.25;   ///< initial simplex edge (absolute, per coordinate)
};

struct nm_report {
  Eigen::VectorXd x;
  double fx = std::numeric_limits<double>::infinity();
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

/// Derivative-free Nelder-Mead minimizer (reflection 1, expansion 2,
/// contraction 0.5, shrink 0.5).
///
/// Non-finite objective values encountered during the search are treated as
/// +inf so the simplex backs away from bad regions; a non-finite value at the
/// starting point itself throws numeric_error("NonFiniteObjective").
template <class F>
nm_report nelder_mead(F&& f, const Eigen::VectorXd& x0, nm_options opt = {}) {
  const int d = static_cast<int>(x0.size());
  if (d < 1) throw config_error("InvalidSize", "nelder_mead needs dim >= 1");

  nm_report rep;
  const double big = std::numeric_limits<double>::max();
  auto eval = [&](const Eigen::VectorXd& x) {
    ++rep.evaluations;
    const double v = f(x);
    return std::isfinite(v) ? v : big;
  };

  const double f0 = f(x0);
  ++rep.evaluations;
  if (!std::isfinite(f0))
    throw numeric_error("NonFiniteObjective",
                        "objective is not finite at the starting point");

  Eigen::VectorXd best = x0;
  double fbest = f0;

  double step = opt.init_step;
  for (int round = 0; round <= opt.restarts; ++round, step *= 0.25) {
    // Simplex: best point plus d perturbed vertices.
    std::vector<Eigen::VectorXd> xs(d + 1, best);
    std::vector<double> fs(d + 1);
    fs[0] = fbest;
    for (int i = 0; i < d; ++i) {
      xs[i + 1](i) += step * std::max(1.0, std::abs(best(i)));
      fs[i + 1] = eval(xs[i + 1]);
    }

    std::vector<int> order(d + 1);
    auto sort_simplex = [&] {
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](int a, int b) { return fs[a] < fs[b]; });
    };

    bool round_converged = false;
    for (int it = 0; it < opt.max_iters; ++it) {
      ++rep.iterations;
      sort_simplex();
      const int lo = order[0], hi = order[d], second_hi = order[d - 1];

      const double spread = std::abs(fs[hi] - fs[lo]);
      if (spread <= opt.tol * (1.0 + std::abs(fs[lo]))) {
        round_converged = true;
        break;
      }

      Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
      for (int i = 0; i <= d; ++i)
        if (i != hi) centroid += xs[i];
      centroid /= d;

      const Eigen::VectorXd refl = centroid + (centroid - xs[hi]);
      const double f_refl = eval(refl);
      if (f_refl < fs[lo]) {
        const Eigen::VectorXd expd = centroid + 2.0 * (centroid - xs[hi]);
        const double f_expd = eval(expd);
        if (f_expd < f_refl) {
          xs[hi] = expd;
          fs[hi] = f_expd;
        } else {
          xs[hi] = refl;
          fs[hi] = f_refl;
        }
      } else if (f_refl < fs[second_hi]) {
        xs[hi] = refl;
        fs[hi] = f_refl;
      } else {
        const Eigen::VectorXd contr =
            centroid + 0.5 * ((f_refl < fs[hi] ? refl : xs[hi]) - centroid);
        const double f_contr = eval(contr);
        if (f_contr < std::min(f_refl, fs[hi])) {
          xs[hi] = contr;
          fs[hi] = f_contr;
        } else {
          for (int i = 0; i <= d; ++i) {
            if (i == lo) continue;
            xs[i] = xs[lo] + 0.5 * (xs[i] - xs[lo]);
            fs[i] = eval(xs[i]);
          }
        }
      }
    }

    sort_simplex();
    if (fs[order[0]] < fbest) {
      fbest = fs[order[0]];
      best = xs[order[0]];
    }
    rep.converged = round_converged;
  }

  rep.x = best;
  rep.fx = fbest;
  return rep;
}

}  // namespace simuq
