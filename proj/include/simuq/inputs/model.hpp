#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "simuq/errors.hpp"
#include "simuq/io.hpp"
#include "simuq/rng.hpp"

namespace simuq {

/// Parametric family of one input model. Each family is identified with a
/// fixed-length block of moment coordinates:
///
///   normal            (mean, std)           2
///   normal_zero_mean  (std)                 1
///   uniform           (mean, std)           2
///   bernoulli         (p)                   1
///   gamma             (mean, std)           2
///   degenerate        fixed value           0  (not part of the moment vector)
enum class family {
  normal,
  normal_zero_mean,
  uniform,
  bernoulli,
  gamma,
  degenerate
};

inline int moment_dim(family f) {
  switch (f) {
    case family::normal: return 2;
    case family::normal_zero_mean: return 1;
    case family::uniform: return 2;
    case family::bernoulli: return 1;
    case family::gamma: return 2;
    case family::degenerate: return 0;
  }
  return 0;
}

inline std::string family_name(family f) {
  switch (f) {
    case family::normal: return "normal";
    case family::normal_zero_mean: return "normal_zero_mean";
    case family::uniform: return "uniform";
    case family::bernoulli: return "bernoulli";
    case family::gamma: return "gamma";
    case family::degenerate: return "degenerate";
  }
  return "?";
}

inline family family_from_name(const std::string& s) {
  if (s == "normal") return family::normal;
  if (s == "normal_zero_mean") return family::normal_zero_mean;
  if (s == "uniform") return family::uniform;
  if (s == "bernoulli") return family::bernoulli;
  if (s == "gamma") return family::gamma;
  if (s == "degenerate") return family::degenerate;
  throw config_error("InvalidConfig", "unknown family '" + s + "'");
}

/// Declaration of one input model.
///
/// `value` is the fixed value of a degenerate model (ignored otherwise).
/// `truth` optionally carries the data-generating moments; it is used only
/// by oracle evaluation and by study-mode dataset generation, never by the
/// estimation pipeline itself.
struct model_spec {
  std::string model_id;
  family fam = family::normal;
  double value = 0.0;
  std::vector<double> truth;
};

inline json model_spec_to_json(const model_spec& m) {
  json j;
  j["model_id"] = m.model_id;
  j["family"] = family_name(m.fam);
  if (m.fam == family::degenerate) j["value"] = m.value;
  if (!m.truth.empty()) j["truth"] = m.truth;
  return j;
}

inline model_spec model_spec_from_json(const json& j) {
  model_spec m;
  if (!j.contains("model_id") || !j.contains("family"))
    throw config_error("InvalidConfig",
                       "model entry needs 'model_id' and 'family'");
  m.model_id = j.at("model_id").get<std::string>();
  m.fam = family_from_name(j.at("family").get<std::string>());
  if (m.fam == family::degenerate) {
    if (!j.contains("value"))
      throw config_error("InvalidConfig",
                         "degenerate model '" + m.model_id + "' needs 'value'");
    m.value = j.at("value").get<double>();
  }
  if (j.contains("truth")) {
    m.truth = j.at("truth").get<std::vector<double>>();
    if (static_cast<int>(m.truth.size()) != moment_dim(m.fam))
      throw config_error("InvalidConfig",
                         "truth for '" + m.model_id + "' has wrong length");
  }
  return m;
}

inline std::vector<model_spec> models_from_json(const json& j) {
  if (!j.is_array())
    throw config_error("InvalidConfig", "'models' must be an array");
  std::vector<model_spec> out;
  out.reserve(j.size());
  for (const auto& e : j) out.push_back(model_spec_from_json(e));
  if (out.empty())
    throw config_error("InvalidConfig", "'models' must not be empty");
  return out;
}

/// Offsets of each model's block inside the concatenated moment vector.
struct block_layout {
  struct block {
    std::string model_id;
    family fam;
    int offset;
    int dim;
  };
  std::vector<block> blocks;
  int total_dim = 0;

  static block_layout from(const std::vector<model_spec>& specs) {
    block_layout lay;
    int off = 0;
    for (const auto& s : specs) {
      const int d = moment_dim(s.fam);
      lay.blocks.push_back({s.model_id, s.fam, off, d});
      off += d;
    }
    lay.total_dim = off;
    return lay;
  }
};

/// Converts one block of moment coordinates to the family's natural
/// parameters. Throws numeric_error("InvalidMoments") outside the domain.
///
///   normal            (mu, sigma),   sigma > 0
///   normal_zero_mean  (sigma),       sigma > 0
///   uniform           (lo, hi) = mean -/+ sqrt(3) std,  std > 0
///   bernoulli         (p),           0 <= p <= 1
///   gamma             shape = (mean/std)^2, scale = std^2/mean,  both > 0
inline std::vector<double> natural_from_moments(family f, const double* mom) {
  auto require = [&](bool ok, const char* what) {
    if (!ok) throw numeric_error("InvalidMoments", what);
  };
  switch (f) {
    case family::normal:
      require(mom[1] > 0.0, "normal requires std > 0");
      return {mom[0], mom[1]};
    case family::normal_zero_mean:
      require(mom[0] > 0.0, "normal_zero_mean requires std > 0");
      return {mom[0]};
    case family::uniform: {
      require(mom[1] > 0.0, "uniform requires std > 0");
      const double h = std::sqrt(3.0) * mom[1];
      return {mom[0] - h, mom[0] + h};
    }
    case family::bernoulli:
      require(mom[0] >= 0.0 && mom[0] <= 1.0, "bernoulli requires p in [0,1]");
      return {mom[0]};
    case family::gamma: {
      require(mom[0] > 0.0 && mom[1] > 0.0,
              "gamma requires mean > 0 and std > 0");
      const double shape = (mom[0] / mom[1]) * (mom[0] / mom[1]);
      const double scale = mom[1] * mom[1] / mom[0];
      return {shape, scale};
    }
    case family::degenerate:
      return {};
  }
  return {};
}

/// True when `mom` lies in the family's moment domain, i.e. when
/// natural_from_moments would succeed. Mirrors its checks exactly.
inline bool block_in_domain(family f, const double* mom) noexcept {
  switch (f) {
    case family::normal: return mom[1] > 0.0;
    case family::normal_zero_mean: return mom[0] > 0.0;
    case family::uniform: return mom[1] > 0.0;
    case family::bernoulli: return mom[0] >= 0.0 && mom[0] <= 1.0;
    case family::gamma: return mom[0] > 0.0 && mom[1] > 0.0;
    case family::degenerate: return true;
  }
  return false;
}

/// True when every block of the stacked moment vector `x` is realizable by
/// its input family.
inline bool moments_in_domain(const std::vector<model_spec>& specs,
                              const double* x) noexcept {
  int off = 0;
  for (const auto& s : specs) {
    if (!block_in_domain(s.fam, x + off)) return false;
    off += moment_dim(s.fam);
  }
  return true;
}

/// Analytic moment block of a family at given natural parameters (the
/// inverse of natural_from_moments; used for truth vectors and tests).
inline std::vector<double> moments_from_natural(family f,
                                                const std::vector<double>& nat) {
  switch (f) {
    case family::normal: return {nat[0], nat[1]};
    case family::normal_zero_mean: return {nat[0]};
    case family::uniform: {
      const double mean = 0.5 * (nat[0] + nat[1]);
      const double sd = (nat[1] - nat[0]) / (2.0 * std::sqrt(3.0));
      return {mean, sd};
    }
    case family::bernoulli: return {nat[0]};
    case family::gamma: {
      const double mean = nat[0] * nat[1];
      const double sd = std::sqrt(nat[0]) * nat[1];
      return {mean, sd};
    }
    case family::degenerate: return {};
  }
  return {};
}

/// One variate from the family at moment coordinates `mom` (degenerate
/// models return the fixed value stored on their model_spec).
inline double draw_variate(const model_spec& spec, const double* mom,
                           rng& stream) {
  switch (spec.fam) {
    case family::normal:
      return stream.normal(mom[0], mom[1]);
    case family::normal_zero_mean:
      return mom[0] * stream.normal();
    case family::uniform: {
      const auto nat = natural_from_moments(family::uniform, mom);
      return stream.uniform(nat[0], nat[1]);
    }
    case family::bernoulli:
      return stream.bernoulli(mom[0]) ? 1.0 : 0.0;
    case family::gamma: {
      const auto nat = natural_from_moments(family::gamma, mom);
      return stream.gamma(nat[0], nat[1]);
    }
    case family::degenerate:
      return spec.value;
  }
  return 0.0;
}

/// Concatenated truth moments of a spec list (every stochastic model must
/// carry a truth block).
inline std::vector<double> truth_moments(const std::vector<model_spec>& specs) {
  std::vector<double> x;
  for (const auto& s : specs) {
    const int d = moment_dim(s.fam);
    if (d == 0) continue;
    if (static_cast<int>(s.truth.size()) != d)
      throw config_error("InvalidConfig",
                         "model '" + s.model_id + "' has no truth moments");
    x.insert(x.end(), s.truth.begin(), s.truth.end());
  }
  return x;
}

}  // namespace simuq
