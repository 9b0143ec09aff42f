// Acceptance harness: one check per shipped claim, one [PASS]/[FAIL] line
// per check, exit status = number of failures.
//
// Statistical checks run at frozen seeds that were verified to sit away from
// their thresholds, so reruns are stable. Two checks compare a Monte-Carlo
// measurement against an externally published window; where the measurement
// disagrees, the line reports the measured value honestly and points at the
// "Known gaps" section of the README rather than widening the window.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <simuq/numkit/latin_hypercube.hpp>
#include <simuq/sim/bioprocess.hpp>
#include <simuq/sim/jackson.hpp>
#include <simuq/sim/toy.hpp>
#include <simuq/study/study.hpp>

namespace fs = std::filesystem;
using namespace simuq;

namespace {

using clock_type = std::chrono::steady_clock;

int g_failures = 0;
fs::path g_tmp;
double g_bioprocess_mean = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

void run_check(int idx, const std::string& name,
               const std::function<std::pair<bool, std::string>()>& body) {
  const auto t0 = clock_type::now();
  bool ok = false;
  std::string detail;
  try {
    std::tie(ok, detail) = body();
  } catch (const std::exception& e) {
    ok = false;
    detail = std::string("threw: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(clock_type::now() - t0).count();
  std::printf("[%s] %2d %s: %s (%.1fs)\n", ok ? "PASS" : "FAIL", idx,
              name.c_str(), detail.c_str(), secs);
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------- 1 --------
// Bioprocess ground truth: 4e6-replication Monte-Carlo mean against the
// published window [116.66, 116.86], under 2 minutes single-threaded.
std::pair<bool, std::string> c1_bioprocess_oracle() {
  study_config cfg;
  cfg.sim_name = "bioprocess";
  cfg.uq.seed = 20260814;
  cfg.out_dir = (g_tmp / "c1").string();
  const auto t0 = clock_type::now();
  const json o = cmd_oracle(cfg, 4'000'000);
  const double secs = std::chrono::duration<double>(clock_type::now() - t0).count();
  const double mean = o.at("mean").get<double>();
  const double se = o.at("se").get<double>();
  g_bioprocess_mean = mean;
  const bool in_window = mean >= 116.66 && mean <= 116.86;
  const bool ok = in_window && secs < 120.0;
  std::string d = "mean " + fmt(mean) + " (se " + fmt(se) +
                  "), window [116.66, 116.86]";
  if (!in_window) d += "; see README 'Known gaps'";
  return {ok, d};
}

// ---------------------------------------------------------------- 2 --------
// Cell-expansion ground truth: 1e6-replication mean in [17.27, 17.37] with
// the bundled 20-day horizon, under 1 minute.
std::pair<bool, std::string> c2_cell_oracle() {
  study_config cfg;
  cfg.sim_name = "cell";
  cfg.sim_params["terminal_step"] = 19;
  cfg.uq.seed = 20260814;
  cfg.out_dir = (g_tmp / "c2").string();
  const auto t0 = clock_type::now();
  const json o = cmd_oracle(cfg, 1'000'000);
  const double secs = std::chrono::duration<double>(clock_type::now() - t0).count();
  const double mean = o.at("mean").get<double>();
  const double se = o.at("se").get<double>();
  const bool ok = mean >= 17.27 && mean <= 17.37 && secs < 60.0;
  return {ok, "mean " + fmt(mean) + " (se " + fmt(se) +
                  "), window [17.27, 17.37]"};
}

// ---------------------------------------------------------------- 3 --------
// Queueing oracle equivalence: the event-driven estimate agrees with the
// closed-form steady-state mean within 3 standard errors over 50 runs of
// length 1e4, for a single station, a tandem pair, and the default network.
std::pair<bool, std::string> c3_queueing() {
  struct net_case {
    const char* label;
    json params;
  };
  json single, tandem, dflt;
  single["stations"] = 1;
  single["routes"] = json::array({json{{"from", 1}, {"to", 0}}});
  single["truth"]["arrival"] = {0.5, 0.5};
  single["truth"]["service_1"] = {0.25, 0.25};
  single["run_length"] = 10000.0;
  tandem["stations"] = 2;
  tandem["routes"] =
      json::array({json{{"from", 1}, {"to", 2}}, json{{"from", 2}, {"to", 0}}});
  tandem["truth"]["arrival"] = {0.5, 0.5};
  tandem["truth"]["service_1"] = {0.25, 0.25};
  tandem["truth"]["service_2"] = {0.3, 0.3};
  tandem["run_length"] = 10000.0;
  dflt["run_length"] = 10000.0;
  const net_case cases[] = {
      {"single", single}, {"tandem", tandem}, {"default", dflt}};

  std::string d;
  bool ok = true;
  for (const auto& c : cases) {
    const jackson_simulator net(c.params);
    const auto x = net.truth();
    const double analytic = net.analytic_mean(x);
    const auto y = net.simulate(x, 50, mix64(3, fnv1a64(c.label)));
    const double mean = mean_of(y);
    const double se = sd_of(y) / std::sqrt(50.0);
    const bool hit = std::abs(mean - analytic) <= 3.0 * se;
    ok = ok && hit;
    if (!d.empty()) d += "; ";
    d += std::string(c.label) + " " + fmt(mean, 3) + " vs " + fmt(analytic, 3) +
         " (se " + fmt(se, 3) + (hit ? ")" : ", MISS)");
  }
  return {ok, d};
}

// ---------------------------------------------------------------- 4 --------
// Unstable fraction: mean bootstrap probability of an unstable queueing
// configuration over 100 datasets of size m = 50 lies in [0.39, 0.49].
std::pair<bool, std::string> c4_unstable_fraction() {
  const jackson_simulator net;
  const auto specs = net.models();
  const std::uint64_t base = 2;
  const int reps = 100;
  double total = 0.0;
  for (int r = 0; r < reps; ++r) {
    const auto data =
        sample_dataset(specs, [](const std::string&) { return 50; },
                       mix64(base, 7, static_cast<std::uint64_t>(r)));
    total += unstable_fraction(
        data, specs, [&](const std::vector<double>& x) { return net.stable(x); },
        2000, mix64(base, 8, static_cast<std::uint64_t>(r)));
  }
  const double mean = total / reps;
  const bool ok = mean >= 0.39 && mean <= 0.49;
  return {ok, "mean P_U " + fmt(mean) + ", window [0.39, 0.49]"};
}

// ---------------------------------------------------------------- 5 --------
// Interpolation exactness: with zero sampling noise the fitted surface
// reproduces every design mean to 1e-8 with predictive variance <= 1e-8,
// on 10 random 1-d and 10 random 5-d designs.
std::pair<bool, std::string> c5_interpolation() {
  double worst_mean = 0.0, worst_var = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int d = trial < 10 ? 1 : 5;
    const int k = 8;
    design_summary ds;
    ds.points = latin_hypercube(k, d, mix64(5, static_cast<std::uint64_t>(trial)));
    ds.means.resize(k);
    ds.vars = Eigen::VectorXd::Zero(k);
    ds.reps.assign(k, 5);
    rng stream(mix64(55, static_cast<std::uint64_t>(trial)));
    for (int i = 0; i < k; ++i) ds.means(i) = stream.normal(0.0, 1.0);

    const auto model = sk_model::fit(ds);
    for (int i = 0; i < k; ++i) {
      const Eigen::VectorXd xi = ds.points.row(i);
      const auto [m, v] = model.predict(xi.data());
      worst_mean = std::max(worst_mean, std::abs(m - ds.means(i)));
      worst_var = std::max(worst_var, v);
    }
  }
  const bool ok = worst_mean <= 1e-8 && worst_var <= 1e-8;
  return {ok, "worst |mean error| " + fmt(worst_mean, 12) + ", worst var " +
                  fmt(worst_var, 12)};
}

// ---------------------------------------------------------------- 6 --------
// Variance-decomposition identity: E[sigma2_T] = sigma2_I + sigma2_M when
// the total is re-measured from fresh posterior draws at the same predictor
// means, checked with 1e5 draws (500 repetitions x B = 200) to 3 SEs.
std::pair<bool, std::string> c6_identity() {
  const toy_simulator toy;
  const auto specs = toy.models();
  const auto data = sample_dataset(
      specs, [](const std::string&) { return 40; }, mix64(6, 1));
  uq_config cfg;
  cfg.k = 10;
  cfg.budget = 200;
  cfg.B = 200;
  cfg.seed = 11;
  cfg.threads = 1;
  const auto art = run_uq(data, specs, toy, cfg);
  const auto& res = art.result;
  const double target = res.sigma2_I + res.sigma2_M;

  const int reps = 500;
  const int B = res.B;
  std::vector<double> totals(reps);
  std::vector<double> draws(B);
  for (int t = 0; t < reps; ++t) {
    rng stream(mix64(0xC6, static_cast<std::uint64_t>(t)));
    for (int b = 0; b < B; ++b)
      draws[b] = res.mu_b[b] + std::sqrt(res.sigma2_p_b[b]) * stream.normal();
    const double sd = sd_of(draws);
    totals[t] = sd * sd;
  }
  const double mean = mean_of(totals);
  const double se = sd_of(totals) / std::sqrt(static_cast<double>(reps));
  const bool ok = std::abs(mean - target) <= 3.0 * se;
  return {ok, "mean sigma2_T " + fmt(mean, 6) + " vs sigma2_I+sigma2_M " +
                  fmt(target, 6) + " (se " + fmt(se, 6) + ")"};
}

// ---------------------------------------------------------------- 7 --------
// Attribution efficiency and consistency: exact-mode Shapley values sum to
// the full-coalition cost to 1e-10 relative; that cost equals the variance
// of predictor means over the same shared draws to 1e-10 relative; a model
// whose length scales are zeroed gets exactly zero attribution.
std::pair<bool, std::string> c7_attribution() {
  const toy_simulator toy;
  const auto specs = toy.models();
  const auto data = sample_dataset(
      specs, [](const std::string&) { return 40; }, mix64(7, 1));
  uq_config cfg;
  cfg.k = 10;
  cfg.budget = 300;
  cfg.B = 200;
  cfg.seed = 7;
  cfg.threads = 1;
  const auto art = run_uq(data, specs, toy, cfg);

  sa_config sc;
  sc.b_prime = 500;
  sc.exact = true;
  sc.seed = 7;
  sc.threads = 1;
  const auto res = run_sa(art.model, data, specs, sc);

  double sum_s = 0.0;
  for (double v : res.s) sum_s += v;
  const double scale = std::max(1.0, std::abs(res.total));
  const double eff_err = std::abs(sum_s - res.total) / scale;

  // Re-derive the full-coalition cost as the plain sample variance of the
  // predictor means over the identical common-random-numbers table.
  const sa_draw_table table(data, specs, sc.b_prime, sc.seed, sc.policy);
  const std::uint32_t full = (1u << specs.size()) - 1u;
  std::vector<double> means(sc.b_prime);
  std::vector<double> x;
  for (int b = 0; b < sc.b_prime; ++b) {
    table.assemble(full, b, x);
    means[b] = art.model.predict_mean(x.data());
  }
  const double sd = sd_of(means);
  const double var_err = std::abs(sd * sd - res.total) / scale;

  // Null player: kill the last model's coordinates in the correlation.
  const auto lay = block_layout::from(specs);
  int null_l = -1;
  for (int l = static_cast<int>(lay.blocks.size()) - 1; l >= 0; --l)
    if (lay.blocks[l].dim > 0) {
      null_l = l;
      break;
    }
  sk_model flat = art.model;
  for (int j = 0; j < lay.blocks[null_l].dim; ++j)
    flat.theta(lay.blocks[null_l].offset + j) = 0.0;
  flat.rebuild();
  const auto res2 = run_sa(flat, data, specs, sc);
  const bool null_ok = res2.s[null_l] == 0.0;

  const bool ok = eff_err <= 1e-10 && var_err <= 1e-10 && null_ok;
  return {ok, "efficiency err " + fmt(eff_err, 14) + ", shared-draw var err " +
                  fmt(var_err, 14) + ", null player " +
                  (null_ok ? "exact 0" : "NONZERO " + fmt(res2.s[null_l], 14))};
}

// ---------------------------------------------------------------- 8 --------
// Coverage at desk scale: the analytic toy surface with m = 50, k = 20,
// n = 50, B = 1000 over 200 macro-replications covers the truth with the
// wider interval at least 90% of the time.
std::pair<bool, std::string> c8_coverage() {
  study_config cfg;
  cfg.sim_name = "toy";
  cfg.uq.k = 20;
  cfg.uq.budget = 1000;
  cfg.uq.B = 1000;
  cfg.uq.alpha = 0.05;
  cfg.uq.seed = 1;
  cfg.sa.seed = 1;
  cfg.macro_reps = 200;
  cfg.m = 50;
  const toy_simulator toy;
  cfg.truth_mean = toy.true_mean(toy.truth());
  const auto [rows, sum] = run_study(cfg);
  const bool ok = sum.coverage_ciplus >= 0.90;
  return {ok, "CI+ coverage " + fmt(sum.coverage_ciplus, 3) + " (CI0 " +
                  fmt(sum.coverage_ci0, 3) + ") over 200 reps, bound 0.90"};
}

// ---------------------------------------------------------------- 9 --------
// Direction checks: as the real-data size m rises 10 -> 20 -> 40 at a fixed
// simulation budget N = 2000, the mean wide-interval width and the
// input-share ratio both fall monotonically, and the wide interval never
// covers less often than the narrow one (50 macro-replications per m).
std::pair<bool, std::string> c9_directions() {
  const double truth = std::isnan(g_bioprocess_mean)
                           ? [] {
                               study_config c;
                               c.sim_name = "bioprocess";
                               c.uq.seed = 20260814;
                               c.out_dir = (g_tmp / "c9").string();
                               return cmd_oracle(c, 1'000'000).at("mean").get<double>();
                             }()
                           : g_bioprocess_mean;
  std::vector<double> widths, ratios;
  bool cover_ok = true;
  std::string d = "truth " + fmt(truth, 3);
  for (int m : {10, 20, 40}) {
    study_config cfg;
    cfg.sim_name = "bioprocess";
    cfg.uq.k = 20;
    cfg.uq.budget = 2000;
    cfg.uq.B = 1000;
    cfg.uq.seed = 5;
    cfg.sa.seed = 5;
    cfg.macro_reps = 50;
    cfg.m = m;
    cfg.truth_mean = truth;
    const auto [rows, sum] = run_study(cfg);
    widths.push_back(sum.width_ciplus_mean);
    ratios.push_back(sum.ratio_mean);
    cover_ok = cover_ok && sum.coverage_ciplus >= sum.coverage_ci0;
    d += "; m=" + std::to_string(m) + " width+ " + fmt(sum.width_ciplus_mean, 1) +
         " ratio " + fmt(sum.ratio_mean, 3) + " cover+/0 " +
         fmt(sum.coverage_ciplus, 2) + "/" + fmt(sum.coverage_ci0, 2);
  }
  const bool width_mono = widths[0] > widths[1] && widths[1] > widths[2];
  const bool ratio_mono = ratios[0] > ratios[1] && ratios[1] > ratios[2];
  return {width_mono && ratio_mono && cover_ok, d};
}

// --------------------------------------------------------------- 10 --------
// Attribution ordering at small m: over 20 macro-replications of the
// bioprocess pipeline at m = 10, the Shapley shares are claimed to rank
// residual error above batch variation above inoculum in a majority of runs.
std::pair<bool, std::string> c10_ordering() {
  const bioprocess_simulator sim;
  const auto specs = sim.models();
  const std::uint64_t seed = 5;
  const int reps = 20;
  int rank_ok = 0;
  std::map<std::string, int> orderings;
  for (int r = 0; r < reps; ++r) {
    const auto data =
        sample_dataset(specs, [](const std::string&) { return 10; },
                       mix64(seed, 7, static_cast<std::uint64_t>(r)));
    const std::uint64_t ps = mix64(seed, 8, static_cast<std::uint64_t>(r));
    uq_config uc;
    uc.k = 20;
    uc.budget = 2000;
    uc.B = 1000;
    uc.seed = ps;
    uc.threads = 1;
    const auto art = run_uq(data, specs, sim, uc);
    sa_config sc;
    sc.b_prime = 2000;
    sc.exact = true;
    sc.seed = ps;
    sc.threads = 1;
    const auto res = run_sa(art.model, data, specs, sc);
    std::map<std::string, double> s;
    for (std::size_t i = 0; i < res.model_ids.size(); ++i)
      s[res.model_ids[i]] = res.s[i];
    if (s.at("eps_P") > s.at("gamma") && s.at("gamma") > s.at("X0")) ++rank_ok;
    std::vector<std::pair<double, std::string>> three = {
        {s.at("eps_P"), "eps_P"}, {s.at("gamma"), "gamma"}, {s.at("X0"), "X0"}};
    std::sort(three.rbegin(), three.rend());
    ++orderings[three[0].second + ">" + three[1].second + ">" + three[2].second];
  }
  std::string modal;
  int modal_n = 0;
  for (const auto& [o, n] : orderings)
    if (n > modal_n) {
      modal = o;
      modal_n = n;
    }
  const bool ok = rank_ok > reps / 2;
  std::string d = "eps_P>gamma>X0 held in " + std::to_string(rank_ok) + "/" +
                  std::to_string(reps) + "; modal ordering " + modal + " (" +
                  std::to_string(modal_n) + "/" + std::to_string(reps) + ")";
  if (!ok) d += "; see README 'Known gaps'";
  return {ok, d};
}

// --------------------------------------------------------------- 11 --------
// Bootstrap raw-moment unbiasedness: the Monte-Carlo mean of the h-th raw
// moment of a with-replacement resample (h = 1..4) matches the observed
// sample moment within 3 SEs, at 1e5 resamples.
std::pair<bool, std::string> c11_unbiasedness() {
  const int m = 25;
  std::vector<double> v(m);
  rng src(42);
  for (double& x : v) x = src.gamma(2.0, 1.5);

  double obs[4] = {0, 0, 0, 0};
  for (double x : v) {
    double p = 1.0;
    for (int h = 0; h < 4; ++h) obs[h] += (p *= x) / m;
  }

  const int B = 100'000;
  double acc[4] = {0, 0, 0, 0}, acc2[4] = {0, 0, 0, 0};
  rng stream(mix64(11, 0xB0075ULL));
  for (int b = 0; b < B; ++b) {
    double mh[4] = {0, 0, 0, 0};
    for (int r = 0; r < m; ++r) {
      const double x = v[stream.below(m)];
      double p = 1.0;
      for (int h = 0; h < 4; ++h) mh[h] += (p *= x) / m;
    }
    for (int h = 0; h < 4; ++h) {
      acc[h] += mh[h];
      acc2[h] += mh[h] * mh[h];
    }
  }
  bool ok = true;
  std::string d;
  for (int h = 0; h < 4; ++h) {
    const double mean = acc[h] / B;
    const double var = (acc2[h] - B * mean * mean) / (B - 1);
    const double se = std::sqrt(var / B);
    const bool hit = std::abs(mean - obs[h]) <= 3.0 * se;
    ok = ok && hit;
    if (!d.empty()) d += "; ";
    d += "h" + std::to_string(h + 1) + " " + fmt(mean, 3) + " vs " +
         fmt(obs[h], 3) + (hit ? "" : " MISS");
  }
  return {ok, d};
}

// --------------------------------------------------------------- 12 --------
// Determinism: the uq subcommand on the bundled config writes byte-identical
// artifacts across two runs with the same seed, and again when the worker
// pool is forced to four threads.
std::pair<bool, std::string> c12_determinism() {
  const char* bin_env = std::getenv("SIMUQ_BIN");
  const char* src_env = std::getenv("SIMUQ_SRC_DIR");
  const std::string bin = bin_env ? bin_env : "./build/simuq";
  const std::string src = src_env ? src_env : ".";
  const std::string cfg = src + "/configs/bioprocess_uq.json";
  if (!fs::exists(cfg)) return {false, "missing bundled config " + cfg};

  const fs::path outs[3] = {g_tmp / "c12a", g_tmp / "c12b", g_tmp / "c12c"};
  const char* prefix[3] = {"", "", "SIMUQ_THREADS=4 "};
  for (int i = 0; i < 3; ++i) {
    const std::string cmd = std::string(prefix[i]) + "'" + bin +
                            "' uq --config '" + cfg + "' --out '" +
                            outs[i].string() + "' > /dev/null";
    const int rc = std::system(cmd.c_str());
    const int code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    if (code != 0)
      return {false, "run " + std::to_string(i + 1) + " exited " +
                         std::to_string(code)};
  }
  const char* files[] = {"uq_result.json", "samples.csv", "skmodel.json",
                         "design.json"};
  for (const char* f : files) {
    const std::string a = slurp(outs[0] / f);
    if (a.empty()) return {false, std::string(f) + " missing or empty"};
    if (a != slurp(outs[1] / f))
      return {false, std::string(f) + " differs between same-seed runs"};
    if (a != slurp(outs[2] / f))
      return {false, std::string(f) + " differs under SIMUQ_THREADS=4"};
  }
  return {true, "4 artifacts byte-identical across 3 runs"};
}

}  // namespace

int main() {
  g_tmp = fs::temp_directory_path() /
          ("simuq_accept_" + std::to_string(::getpid()));
  fs::create_directories(g_tmp);

  run_check(1, "bioprocess oracle mean", c1_bioprocess_oracle);
  run_check(2, "cell-expansion oracle mean", c2_cell_oracle);
  run_check(3, "queueing oracle vs analytic", c3_queueing);
  run_check(4, "unstable-fraction estimate", c4_unstable_fraction);
  run_check(5, "zero-noise interpolation exactness", c5_interpolation);
  run_check(6, "variance-decomposition identity", c6_identity);
  run_check(7, "attribution efficiency and null player", c7_attribution);
  run_check(8, "toy coverage at desk scale", c8_coverage);
  run_check(9, "width/ratio monotonicity in m", c9_directions);
  run_check(10, "attribution ordering at small m", c10_ordering);
  run_check(11, "bootstrap raw-moment unbiasedness", c11_unbiasedness);
  run_check(12, "byte-identical uq reruns", c12_determinism);

  std::error_code ec;
  fs::remove_all(g_tmp, ec);
  std::printf("%d of 12 checks failed\n", g_failures);
  return g_failures;
}
