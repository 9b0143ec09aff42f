#pragma once

#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "simuq/errors.hpp"

namespace simuq {

/// Cholesky factorization of a symmetric positive definite matrix with an
/// escalating diagonal-jitter fallback for near-singular inputs.
///
/// The ladder starts at 1e-10 * mean(diag(A)) and multiplies by 10 up to
/// 1e-4 * mean(diag(A)); if no rung succeeds the factorization throws
/// numeric_error("NotPositiveDefinite"). `jitter` records the amount that
/// was actually added (0 when none was needed).
struct spd_factor {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double log_det = 0.0;
  double jitter = 0.0;

  template <class Rhs>
  auto solve(const Rhs& b) const {
    return llt.solve(b).eval();
  }
};

inline spd_factor spd_factorize(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols() || a.rows() == 0)
    throw config_error("InvalidSize", "spd_factorize requires a square matrix");
  const double mean_diag = a.diagonal().mean();
  if (!(mean_diag > 0.0) || !std::isfinite(mean_diag))
    throw numeric_error("NotPositiveDefinite",
                        "matrix diagonal is not positive");

  spd_factor f;
  f.llt.compute(a);
  if (f.llt.info() != Eigen::Success) {
    double jitter = 1e-10 * mean_diag;
    const double jitter_cap = 1e-4 * mean_diag;
    bool ok = false;
    while (jitter <= jitter_cap * (1.0 + 1e-12)) {
      Eigen::MatrixXd aj = a;
      aj.diagonal().array() += jitter;
      f.llt.compute(aj);
      if (f.llt.info() == Eigen::Success) {
        f.jitter = jitter;
        ok = true;
        break;
      }
      jitter *= 10.0;
    }
    if (!ok)
      throw numeric_error("NotPositiveDefinite",
                          "Cholesky failed even with maximum jitter");
  }

  const auto& l = f.llt.matrixLLT();
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) log_det += std::log(l(i, i));
  f.log_det = 2.0 * log_det;
  if (!std::isfinite(f.log_det))
    throw numeric_error("NotPositiveDefinite", "non-finite log determinant");
  return f;
}

/// One-shot solve A x = b for SPD A; also reports log|A| and applied jitter
/// through the returned factor if the caller needs them.
inline Eigen::MatrixXd spd_solve(const Eigen::MatrixXd& a,
                                 const Eigen::MatrixXd& b) {
  return spd_factorize(a).solve(b);
}

}  // namespace simuq
