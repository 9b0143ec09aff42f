#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "simuq/errors.hpp"
#include "simuq/inputs/dataset.hpp"
#include "simuq/io.hpp"
#include "simuq/parallel.hpp"
#include "simuq/shapley/shapley.hpp"
#include "simuq/sim/registry.hpp"
#include "simuq/uq/uq.hpp"

namespace simuq {

/// One configuration file drives every subcommand. Fields:
///
///   simulator      {"name": ..., "params": {...}}           (required)
///   models         [model spec...] - defaults to the simulator's layout
///   dataset        CSV path (required by design/fit/uq/shapley)
///   design         {"k", "N", "q", "B0", "max_rounds"}
///   uq             {"B", "alpha"}
///   sa             {"B_prime", "mode": "exact"|"sampled", "permutations"}
///   study          {"macro_reps", "m", "m_overrides": {id: m}, "truth_mean"}
///   seed, out      defaults 0 and "out" (CLI flags override)
struct study_config {
  std::string sim_name;
  json sim_params = json::object();
  std::vector<model_spec> models;
  std::string dataset_path;

  uq_config uq{};
  sa_config sa{};

  int macro_reps = 20;
  int m = 50;
  std::map<std::string, int> m_overrides;
  double truth_mean = std::numeric_limits<double>::quiet_NaN();

  std::string out_dir = "out";

  std::unique_ptr<simulator> make_sim() const {
    return make_simulator(sim_name, sim_params);
  }

  int m_for(const std::string& id) const {
    auto it = m_overrides.find(id);
    return it != m_overrides.end() ? it->second : m;
  }

  input_dataset load_dataset() const {
    if (dataset_path.empty())
      throw config_error("InvalidConfig", "config has no 'dataset' path");
    return input_dataset::load_csv(dataset_path);
  }
};

inline study_config load_config(const std::string& path) {
  const json j = read_json(path);
  study_config cfg;
  try {
    if (!j.contains("simulator") || !j.at("simulator").contains("name"))
      throw config_error("InvalidConfig", "config needs simulator.name");
    cfg.sim_name = j.at("simulator").at("name").get<std::string>();
    cfg.sim_params = j.at("simulator").value("params", json::object());

    if (j.contains("models")) cfg.models = models_from_json(j.at("models"));

    cfg.dataset_path = j.value("dataset", std::string());
    // Dataset paths are relative to the config file's directory.
    if (!cfg.dataset_path.empty() &&
        !std::filesystem::path(cfg.dataset_path).is_absolute())
      cfg.dataset_path = (std::filesystem::path(path).parent_path() /
                          cfg.dataset_path)
                             .string();

    if (j.contains("design")) {
      const auto& d = j.at("design");
      cfg.uq.k = d.value("k", cfg.uq.k);
      cfg.uq.budget = d.value("N", cfg.uq.budget);
      cfg.uq.q = d.value("q", cfg.uq.q);
      cfg.uq.design.b0 = d.value("B0", cfg.uq.design.b0);
      cfg.uq.design.max_rounds = d.value("max_rounds", cfg.uq.design.max_rounds);
    }
    if (j.contains("uq")) {
      const auto& u = j.at("uq");
      cfg.uq.B = u.value("B", cfg.uq.B);
      cfg.uq.alpha = u.value("alpha", cfg.uq.alpha);
    }
    if (j.contains("sa")) {
      const auto& s = j.at("sa");
      cfg.sa.b_prime = s.value("B_prime", cfg.sa.b_prime);
      const std::string mode = s.value("mode", std::string("exact"));
      if (mode != "exact" && mode != "sampled")
        throw config_error("InvalidConfig", "sa.mode must be exact|sampled");
      cfg.sa.exact = mode == "exact";
      cfg.sa.permutations = s.value("permutations", cfg.sa.permutations);
    }
    if (j.contains("study")) {
      const auto& s = j.at("study");
      cfg.macro_reps = s.value("macro_reps", cfg.macro_reps);
      cfg.m = s.value("m", cfg.m);
      if (s.contains("m_overrides"))
        for (const auto& [id, v] : s.at("m_overrides").items())
          cfg.m_overrides[id] = v.get<int>();
      cfg.truth_mean = s.value("truth_mean", cfg.truth_mean);
    }
    cfg.uq.seed = j.value("seed", std::uint64_t{0});
    cfg.sa.seed = cfg.uq.seed;
    cfg.out_dir = j.value("out", cfg.out_dir);
  } catch (const nlohmann::json::exception& e) {
    throw config_error("InvalidConfig", path + ": " + e.what());
  }
  return cfg;
}

/// Model list for a run: the config's own list when given, otherwise the
/// simulator's intrinsic layout.
inline std::vector<model_spec> effective_models(const study_config& cfg,
                                                const simulator& sim) {
  return cfg.models.empty() ? sim.models() : cfg.models;
}

inline std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

/// design: build and persist the experiment design alone.
inline json cmd_design(const study_config& cfg) {
  const auto sim = cfg.make_sim();
  const auto specs = effective_models(cfg, *sim);
  const auto data = cfg.load_dataset();
  const auto dsg = make_design(data, specs, cfg.uq.k, cfg.uq.budget, cfg.uq.q,
                               mix64(cfg.uq.seed, 1), cfg.uq.design);
  const json out = dsg.to_json();
  write_json(join_path(cfg.out_dir, "design.json"), out);
  return out;
}

namespace detail {

inline uq_artifacts run_uq_for(const study_config& cfg,
                               const input_dataset& data,
                               const simulator& sim) {
  const auto specs = effective_models(cfg, sim);
  return run_uq(data, specs, sim, cfg.uq);
}

}  // namespace detail

/// fit: design + simulate + fit, persisting design.json and skmodel.json.
inline json cmd_fit(const study_config& cfg) {
  const auto sim = cfg.make_sim();
  const auto data = cfg.load_dataset();
  const auto art = detail::run_uq_for(cfg, data, *sim);
  write_json(join_path(cfg.out_dir, "design.json"), art.design.to_json());
  const json out = art.model.to_json();
  write_json(join_path(cfg.out_dir, "skmodel.json"), out);
  return out;
}

/// uq: the full pipeline; persists uq_result.json, design.json,
/// skmodel.json and samples.csv.
inline json cmd_uq(const study_config& cfg) {
  const auto sim = cfg.make_sim();
  const auto data = cfg.load_dataset();
  const auto art = detail::run_uq_for(cfg, data, *sim);
  write_json(join_path(cfg.out_dir, "design.json"), art.design.to_json());
  write_json(join_path(cfg.out_dir, "skmodel.json"), art.model.to_json());
  const json out = art.result.to_json();
  write_json(join_path(cfg.out_dir, "uq_result.json"), out);
  write_text(join_path(cfg.out_dir, "samples.csv"), art.result.samples_csv());
  return out;
}

/// shapley: reuses out/skmodel.json when present (so a fit or uq run can be
/// attributed without refitting), otherwise fits first. Persists
/// shapley.json and shapley.csv.
inline json cmd_shapley(const study_config& cfg) {
  const auto sim = cfg.make_sim();
  const auto specs = effective_models(cfg, *sim);
  const auto data = cfg.load_dataset();
  sk_model model;
  const std::string model_path = join_path(cfg.out_dir, "skmodel.json");
  if (std::filesystem::exists(model_path)) {
    model = sk_model::from_json(read_json(model_path));
  } else {
    model = detail::run_uq_for(cfg, data, *sim).model;
    write_json(model_path, model.to_json());
  }
  const auto res = run_sa(model, data, specs, cfg.sa);
  const json out = res.to_json();
  write_json(join_path(cfg.out_dir, "shapley.json"), out);
  write_text(join_path(cfg.out_dir, "shapley.csv"), res.to_csv());
  return out;
}

/// oracle: the truth value of the configured simulator. Jackson networks
/// report the exact analytic mean; everything else reports a Monte-Carlo
/// estimate with its standard error.
inline json cmd_oracle(const study_config& cfg, long long reps) {
  const auto sim = cfg.make_sim();
  const auto x = sim->truth();
  json out;
  if (const auto* net = dynamic_cast<const jackson_simulator*>(sim.get())) {
    out["mean"] = net->analytic_mean(x);
    out["exact"] = true;
  } else {
    if (reps < 2) throw config_error("InvalidSize", "need reps >= 2");
    const auto y = sim->simulate(x, static_cast<int>(reps), cfg.uq.seed);
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(reps);
    double ss = 0.0;
    for (double v : y) ss += (v - mean) * (v - mean);
    const double se =
        std::sqrt(ss / (static_cast<double>(reps) - 1.0) /
                  static_cast<double>(reps));
    out["mean"] = mean;
    out["se"] = se;
    out["reps"] = reps;
    out["exact"] = false;
  }
  out["seed"] = cfg.uq.seed;
  write_json(join_path(cfg.out_dir, "oracle.json"), out);
  return out;
}

struct study_row {
  int rep = 0;
  uq_result res;
  bool cover0 = false, coverplus = false;
};

struct study_summary {
  int macro_reps = 0;
  double truth_mean = 0.0;
  double coverage_ci0 = 0.0, coverage_ciplus = 0.0;
  double width_ci0_mean = 0.0, width_ci0_sd = 0.0;
  double width_ciplus_mean = 0.0, width_ciplus_sd = 0.0;
  double ratio_mean = 0.0;
  std::uint64_t seed = 0;

  json to_json() const {
    json j;
    j["macro_reps"] = macro_reps;
    j["truth_mean"] = truth_mean;
    j["coverage_ci0"] = coverage_ci0;
    j["coverage_ciplus"] = coverage_ciplus;
    j["width_ci0_mean"] = width_ci0_mean;
    j["width_ci0_sd"] = width_ci0_sd;
    j["width_ciplus_mean"] = width_ciplus_mean;
    j["width_ciplus_sd"] = width_ciplus_sd;
    j["ratio_mean"] = ratio_mean;
    j["seed"] = seed;
    return j;
  }
};

/// study: repeats (generate data from truth -> run the uq pipeline) across
/// macro replications with derived seeds, and reports interval coverage of
/// the configured truth mean plus width and ratio summaries.
///
/// Macro replication r draws its dataset with stream key mix(seed, 7, r) and
/// runs the pipeline with seed mix(seed, 8, r). Replications run in
/// parallel; each one runs its inner loops serially.
inline std::pair<std::vector<study_row>, study_summary> run_study(
    const study_config& cfg) {
  if (cfg.macro_reps < 1)
    throw config_error("InvalidSize", "need macro_reps >= 1");
  if (std::isnan(cfg.truth_mean))
    throw config_error("InvalidConfig",
                       "study needs 'truth_mean' (see the oracle subcommand)");
  const auto sim = cfg.make_sim();
  const auto specs = effective_models(cfg, *sim);

  std::vector<study_row> rows(cfg.macro_reps);
  parallel_for(
      cfg.macro_reps,
      [&](std::int64_t r) {
        const auto data = sample_dataset(
            specs, [&](const std::string& id) { return cfg.m_for(id); },
            mix64(cfg.uq.seed, 7, static_cast<std::uint64_t>(r)));
        uq_config ucfg = cfg.uq;
        ucfg.seed = mix64(cfg.uq.seed, 8, static_cast<std::uint64_t>(r));
        ucfg.threads = 1;
        const auto art = run_uq(data, specs, *sim, ucfg);
        study_row row;
        row.rep = static_cast<int>(r) + 1;
        row.res = art.result;
        row.cover0 = art.result.ci0_lo <= cfg.truth_mean &&
                     cfg.truth_mean <= art.result.ci0_hi;
        row.coverplus = art.result.ciplus_lo <= cfg.truth_mean &&
                        cfg.truth_mean <= art.result.ciplus_hi;
        rows[r] = row;
      },
      cfg.uq.threads);

  study_summary sum;
  sum.macro_reps = cfg.macro_reps;
  sum.truth_mean = cfg.truth_mean;
  sum.seed = cfg.uq.seed;
  std::vector<double> w0, wp;
  for (const auto& row : rows) {
    sum.coverage_ci0 += row.cover0 ? 1.0 : 0.0;
    sum.coverage_ciplus += row.coverplus ? 1.0 : 0.0;
    w0.push_back(row.res.ci0_hi - row.res.ci0_lo);
    wp.push_back(row.res.ciplus_hi - row.res.ciplus_lo);
    sum.ratio_mean += row.res.ratio;
  }
  sum.coverage_ci0 /= cfg.macro_reps;
  sum.coverage_ciplus /= cfg.macro_reps;
  sum.ratio_mean /= cfg.macro_reps;
  auto mean_sd = [](const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd =
        v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    return std::pair<double, double>(mean, sd);
  };
  std::tie(sum.width_ci0_mean, sum.width_ci0_sd) = mean_sd(w0);
  std::tie(sum.width_ciplus_mean, sum.width_ciplus_sd) = mean_sd(wp);
  return {rows, sum};
}

inline json cmd_study(const study_config& cfg) {
  const auto [rows, sum] = run_study(cfg);
  std::string csv =
      "rep,ci0_lo,ci0_hi,ciplus_lo,ciplus_hi,cover0,coverplus,"
      "sigma2_I,sigma2_M,sigma2_T,ratio\n";
  for (const auto& row : rows) {
    csv += std::to_string(row.rep) + "," + fmt_double(row.res.ci0_lo) + "," +
           fmt_double(row.res.ci0_hi) + "," + fmt_double(row.res.ciplus_lo) +
           "," + fmt_double(row.res.ciplus_hi) + "," +
           (row.cover0 ? "1" : "0") + "," + (row.coverplus ? "1" : "0") + "," +
           fmt_double(row.res.sigma2_I) + "," + fmt_double(row.res.sigma2_M) +
           "," + fmt_double(row.res.sigma2_T) + "," +
           fmt_double(row.res.ratio) + "\n";
  }
  write_text(join_path(cfg.out_dir, "study.csv"), csv);
  const json out = sum.to_json();
  write_json(join_path(cfg.out_dir, "study_summary.json"), out);
  return out;
}

}  // namespace simuq
