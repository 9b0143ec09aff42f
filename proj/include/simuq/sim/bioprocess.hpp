#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "simuq/errors.hpp"
#include "simuq/sim/simulator.hpp"

namespace simuq {

/// Four-step protein purification chain.
///
/// Fermentation over horizon T grows protein and impurity from a shared
/// exponential growth rate, each with additive measurement noise:
///   X_F = X0 exp(gamma T) + eps_P      (protein)
///   I_F = I0 exp(gamma T) + eps_I      (impurity, fixed inoculum I0)
/// Centrifugation keeps a fraction Q of the impurity, chromatography keeps
/// Q_P of the protein and Q_I of the impurity, filtration keeps Q_fr of the
/// impurity:
///   I_C = Q I_F,        X_C = X_F
///   X_P = Q_P X_C,      I_P = Q_I I_C
///   I_fr = Q_fr I_P,    X_fr = X_P
/// A batch passes when the final impurity ratio I_fr / (X_fr + I_fr) is at
/// most `omega`; the replication output is the protein yield X_fr for a
/// passing batch and 0 for a failing one.
///
/// Draw order per replication: X0, gamma, eps_P, eps_I, Q, Q_P, Q_I, Q_fr.
/// Draws that would make X0, X_F or I_F nonpositive are redrawn (at most 100
/// times each; the count is reported in the stats struct).
struct bioprocess_params {
  double horizon = 54.0;  ///< fermentation length T
  double i0 = 14.64;      ///< starting impurity level
  double omega = 0.25;    ///< highest acceptable impurity ratio
};

struct sim_stats {
  std::int64_t redraws = 0;
};

class bioprocess_simulator : public simulator {
 public:
  explicit bioprocess_simulator(const json& params = json::object()) {
    p_.horizon = params.value("horizon", p_.horizon);
    p_.i0 = params.value("i0", p_.i0);
    p_.omega = params.value("omega", p_.omega);
    const double u3 = 2.0 * std::sqrt(3.0);
    specs_ = {
        {"eps_P", family::normal_zero_mean, 0.0, {0.4918}},
        {"gamma", family::normal, 0.0, {0.0475, 0.008}},
        {"X0", family::normal, 0.0, {15.98, 4.17}},
        {"eps_I", family::normal_zero_mean, 0.0, {0.4918}},
        {"Q", family::uniform, 0.0, {0.45, 0.1 / u3}},
        {"Q_P", family::uniform, 0.0, {0.537, 0.1074 / u3}},
        {"Q_I", family::uniform, 0.0, {0.162, 0.0324 / u3}},
        {"Q_fr", family::uniform, 0.0, {0.995, 0.01 / u3}},
    };
    if (params.contains("truth"))
      for (auto& s : specs_)
        if (params.at("truth").contains(s.model_id))
          s.truth = params.at("truth").at(s.model_id).get<std::vector<double>>();
  }

  const std::vector<model_spec>& models() const override { return specs_; }

  std::vector<double> simulate(const std::vector<double>& x, int n,
                               std::uint64_t seed) const override {
    sim_stats stats;
    return simulate_with_stats(x, n, seed, stats);
  }

  std::vector<double> simulate_with_stats(const std::vector<double>& x, int n,
                                          std::uint64_t seed,
                                          sim_stats& stats) const {
    check_input(x, n);
    // Block offsets: eps_P 0, gamma 1..2, X0 3..4, eps_I 5, Q 6..7,
    // Q_P 8..9, Q_I 10..11, Q_fr 12..13.
    std::vector<double> out(n);
    for (int j = 0; j < n; ++j) {
      rng stream(mix64(seed, static_cast<std::uint64_t>(j)));
      auto positive_draw = [&](const model_spec& s, const double* mom) {
        for (int attempt = 0; attempt < 100; ++attempt) {
          const double v = draw_variate(s, mom, stream);
          if (v > 0.0) return v;
          ++stats.redraws;
        }
        throw numeric_error("ExhaustedRedraws",
                            "could not draw a positive value for '" +
                                s.model_id + "'");
      };

      const double x0 = positive_draw(specs_[2], x.data() + 3);
      const double growth = draw_variate(specs_[1], x.data() + 1, stream);
      const double scale = std::exp(growth * p_.horizon);

      double protein = 0.0;
      for (int attempt = 0;; ++attempt) {
        protein = x0 * scale + draw_variate(specs_[0], x.data() + 0, stream);
        if (protein > 0.0) break;
        ++stats.redraws;
        if (attempt >= 99)
          throw numeric_error("ExhaustedRedraws",
                              "fermentation protein output stayed nonpositive");
      }
      double impurity = 0.0;
      for (int attempt = 0;; ++attempt) {
        impurity =
            p_.i0 * scale + draw_variate(specs_[3], x.data() + 5, stream);
        if (impurity > 0.0) break;
        ++stats.redraws;
        if (attempt >= 99)
          throw numeric_error("ExhaustedRedraws",
                              "fermentation impurity output stayed nonpositive");
      }

      const double q = draw_variate(specs_[4], x.data() + 6, stream);
      const double q_p = draw_variate(specs_[5], x.data() + 8, stream);
      const double q_i = draw_variate(specs_[6], x.data() + 10, stream);
      const double q_fr = draw_variate(specs_[7], x.data() + 12, stream);

      const double i_c = q * impurity;
      const double x_p = q_p * protein;
      const double i_p = q_i * i_c;
      const double i_fr = q_fr * i_p;
      const double ratio = i_fr / (x_p + i_fr);
      out[j] = ratio <= p_.omega ? x_p : 0.0;
    }
    return out;
  }

  /// Noise-free pass through the chain at the block means (test hook).
  double deterministic_yield(const std::vector<double>& x) const {
    check_input(x, 1);
    const double scale = std::exp(x[1] * p_.horizon);
    const double protein = x[3] * scale;
    const double impurity = p_.i0 * scale;
    const double x_p = x[8] * protein;
    const double i_fr = x[12] * (x[10] * (x[6] * impurity));
    const double ratio = i_fr / (x_p + i_fr);
    return ratio <= p_.omega ? x_p : 0.0;
  }

 private:
  bioprocess_params p_;
  std::vector<model_spec> specs_;
};

}  // namespace simuq
