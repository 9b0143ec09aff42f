#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "simuq/errors.hpp"
#include "simuq/inputs/model.hpp"
#include "simuq/io.hpp"

namespace simuq {

/// Real-world observations of the input models: per model id, the raw sample
/// its moments are estimated from. Insertion order is preserved.
class input_dataset {
 public:
  void add(const std::string& model_id, double value) {
    auto it = index_.find(model_id);
    if (it == index_.end()) {
      index_.emplace(model_id, columns_.size());
      columns_.push_back({model_id, {value}});
    } else {
      columns_[it->second].second.push_back(value);
    }
  }

  bool has(const std::string& model_id) const {
    return index_.count(model_id) > 0;
  }

  const std::vector<double>& values(const std::string& model_id) const {
    auto it = index_.find(model_id);
    if (it == index_.end())
      throw config_error("InvalidConfig",
                         "dataset has no samples for model '" + model_id + "'");
    return columns_[it->second].second;
  }

  const std::vector<std::pair<std::string, std::vector<double>>>& columns()
      const {
    return columns_;
  }

  /// Parses "model_id,value" CSV (header line optional).
  static input_dataset from_csv(const std::string& text) {
    input_dataset ds;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (lineno == 1 && line == "model_id,value") continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos)
        throw config_error("InvalidData",
                           "dataset line " + std::to_string(lineno) +
                               ": expected 'model_id,value'");
      const std::string id = line.substr(0, comma);
      try {
        ds.add(id, std::stod(line.substr(comma + 1)));
      } catch (const std::exception&) {
        throw config_error("InvalidData", "dataset line " +
                                              std::to_string(lineno) +
                                              ": bad numeric value");
      }
    }
    return ds;
  }

  static input_dataset load_csv(const std::string& path) {
    return from_csv(read_text(path));
  }

  std::string to_csv() const {
    std::string out = "model_id,value\n";
    for (const auto& [id, vals] : columns_)
      for (double v : vals) out += id + "," + fmt_double(v) + "\n";
    return out;
  }

 private:
  std::vector<std::pair<std::string, std::vector<double>>> columns_;
  std::map<std::string, std::size_t> index_;
};

namespace detail {

/// Moment block of one family from a raw sample, shared by the point
/// estimator and the bootstrap. Means are sample means; stds are sample
/// standard deviations about the sample mean with the n-1 divisor (also for
/// the zero-mean family, whose location is known but estimated scale uses
/// the standard centered estimator); bernoulli p is the sample proportion.
inline void block_moments(family f, const std::vector<double>& v,
                          double* out) {
  const std::size_t m = v.size();
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(m);
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd =
      m > 1 ? std::sqrt(ss / static_cast<double>(m - 1)) : 0.0;
  switch (f) {
    case family::normal:
    case family::uniform:
    case family::gamma:
      out[0] = mean;
      out[1] = sd;
      break;
    case family::normal_zero_mean:
      out[0] = sd;
      break;
    case family::bernoulli:
      out[0] = mean;
      break;
    case family::degenerate:
      break;
  }
}

}  // namespace detail

/// Point estimate of the concatenated moment vector from the dataset.
///
/// Every stochastic model needs at least 2 observations; bernoulli samples
/// must be 0/1 valued. Degenerate models contribute no coordinates.
inline std::vector<double> estimate_moments(
    const input_dataset& data, const std::vector<model_spec>& specs) {
  const auto layout = block_layout::from(specs);
  std::vector<double> x(layout.total_dim, 0.0);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    if (s.fam == family::degenerate) continue;
    const auto& v = data.values(s.model_id);
    if (v.size() < 2)
      throw config_error("InsufficientData",
                         "model '" + s.model_id + "' needs >= 2 observations");
    if (s.fam == family::bernoulli)
      for (double b : v)
        if (b != 0.0 && b != 1.0)
          throw config_error("InvalidData", "bernoulli model '" + s.model_id +
                                                "' has non-binary values");
    detail::block_moments(s.fam, v, x.data() + layout.blocks[i].offset);
  }
  return x;
}

/// Draws a synthetic dataset from the models' truth moments: m_of(model_id)
/// observations per stochastic model, one derived substream per model.
template <class MOf>
input_dataset sample_dataset(const std::vector<model_spec>& specs, MOf&& m_of,
                             std::uint64_t seed) {
  input_dataset ds;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    if (s.fam == family::degenerate) continue;
    if (static_cast<int>(s.truth.size()) != moment_dim(s.fam))
      throw config_error("InvalidConfig",
                         "model '" + s.model_id + "' has no truth moments");
    rng stream(mix64(seed, fnv1a64(s.model_id)));
    const int m = m_of(s.model_id);
    if (m < 2)
      throw config_error("InvalidConfig",
                         "need m >= 2 samples for '" + s.model_id + "'");
    for (int r = 0; r < m; ++r)
      ds.add(s.model_id, draw_variate(s, s.truth.data(), stream));
  }
  return ds;
}

}  // namespace simuq
