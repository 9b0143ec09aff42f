#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include <simuq/inputs/dataset.hpp>
#include <simuq/io.hpp>
#include <simuq/sim/toy.hpp>

using namespace simuq;
namespace fs = std::filesystem;

namespace {

struct cli_fixture {
  std::string bin;
  fs::path dir;
  fs::path config;

  cli_fixture() {
    const char* env = std::getenv("SIMUQ_BIN");
    REQUIRE(env != nullptr);  // set by ctest; export manually when run bare
    bin = env;
    dir = fs::temp_directory_path() /
          ("simuq_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir);

    const auto specs = toy_simulator().models();
    const auto data =
        sample_dataset(specs, [](const std::string&) { return 30; }, 12);
    write_text((dir / "data.csv").string(), data.to_csv());

    json cfg;
    cfg["simulator"] = {{"name", "toy"}};
    cfg["dataset"] = "data.csv";
    cfg["design"] = {{"k", 8}, {"N", 160}, {"B0", 300}};
    cfg["uq"] = {{"B", 200}};
    cfg["sa"] = {{"B_prime", 100}};
    cfg["study"] = {{"macro_reps", 3}, {"m", 20}, {"truth_mean", 9.4827}};
    cfg["seed"] = 5;
    cfg["out"] = (dir / "out").string();
    config = dir / "cfg.json";
    write_json(config.string(), cfg);
  }

  int run(const std::string& args, const std::string& env = "") const {
    const std::string cmd = env + (env.empty() ? "" : " ") + bin + " " + args +
                            " > " + (dir / "stdout.txt").string() + " 2> " +
                            (dir / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string out_file(const std::string& name) const {
    return (dir / "out" / name).string();
  }
};

cli_fixture& fx() {
  static cli_fixture f;
  return f;
}

}  // namespace

TEST_CASE("uq subcommand writes the full artifact set") {
  auto& f = fx();
  REQUIRE(f.run("uq --config " + f.config.string()) == 0);
  for (const char* name :
       {"design.json", "skmodel.json", "uq_result.json", "samples.csv"})
    CHECK(fs::exists(f.out_file(name)));

  const auto r = read_json(f.out_file("uq_result.json"));
  CHECK(r.at("B").get<int>() == 200);
  CHECK(r.at("ci0_lo").get<double>() <= r.at("ci0_hi").get<double>());
  CHECK(r.at("seed").get<std::uint64_t>() == 5);

  const auto stdout_text = read_text((f.dir / "stdout.txt").string());
  CHECK(stdout_text.find("\"sigma2_I\"") != std::string::npos);
}

TEST_CASE("reruns are byte-identical, also under forced threading") {
  auto& f = fx();
  REQUIRE(f.run("uq --config " + f.config.string()) == 0);
  const auto first = read_text(f.out_file("uq_result.json"));
  const auto first_csv = read_text(f.out_file("samples.csv"));

  REQUIRE(f.run("uq --config " + f.config.string(), "SIMUQ_THREADS=4") == 0);
  CHECK(read_text(f.out_file("uq_result.json")) == first);
  CHECK(read_text(f.out_file("samples.csv")) == first_csv);

  // A different seed must change the result.
  REQUIRE(f.run("uq --config " + f.config.string() + " --seed 6") == 0);
  CHECK(read_text(f.out_file("uq_result.json")) != first);

  // Restore the artifact set for later test cases.
  REQUIRE(f.run("uq --config " + f.config.string()) == 0);
}

TEST_CASE("design and fit subcommands emit their artifacts") {
  auto& f = fx();
  REQUIRE(f.run("design --config " + f.config.string()) == 0);
  const auto d = read_json(f.out_file("design.json"));
  CHECK(d.at("points").size() == 8);
  CHECK(d.at("n_per_point").get<int>() == 20);
  CHECK(d.at("provenance").contains("coverage_b1"));

  REQUIRE(f.run("fit --config " + f.config.string()) == 0);
  const auto m = read_json(f.out_file("skmodel.json"));
  CHECK(m.at("theta").size() == 4);
  CHECK(m.at("tau2").get<double>() > 0.0);
}

TEST_CASE("shapley reuses the persisted metamodel") {
  auto& f = fx();
  REQUIRE(fs::exists(f.out_file("skmodel.json")));  // from the fit above
  REQUIRE(f.run("shapley --config " + f.config.string()) == 0);
  const auto s = read_json(f.out_file("shapley.json"));
  CHECK(s.at("mode").get<std::string>() == "exact");
  CHECK(s.at("s").size() == 2);
  const auto csv = read_text(f.out_file("shapley.csv"));
  CHECK(csv.rfind("model_id,s,share_percent\n", 0) == 0);
}

TEST_CASE("oracle reports the simulator truth with a standard error") {
  auto& f = fx();
  REQUIRE(f.run("oracle --config " + f.config.string() + " --reps 20000") == 0);
  const auto o = read_json(f.out_file("oracle.json"));
  CHECK(o.at("exact").get<bool>() == false);
  CHECK(o.at("mean").get<double>() == Catch::Approx(9.4827).margin(0.05));
  CHECK(o.at("se").get<double>() > 0.0);
  CHECK(o.at("reps").get<long long>() == 20000);
}

TEST_CASE("study emits per-replication rows and a summary") {
  auto& f = fx();
  REQUIRE(f.run("study --config " + f.config.string() + " --macro-reps 2") == 0);
  const auto csv = read_text(f.out_file("study.csv"));
  CHECK(csv.rfind("rep,ci0_lo,ci0_hi,ciplus_lo,ciplus_hi,cover0,coverplus,"
                  "sigma2_I,sigma2_M,sigma2_T,ratio\n",
                  0) == 0);
  const auto s = read_json(f.out_file("study_summary.json"));
  CHECK(s.at("macro_reps").get<int>() == 2);
  CHECK(s.at("truth_mean").get<double>() == 9.4827);
  CHECK(s.at("coverage_ciplus").get<double>() >= 0.0);
}

TEST_CASE("csv output mode flattens the primitive fields") {
  auto& f = fx();
  REQUIRE(f.run("uq --config " + f.config.string() + " --format csv") == 0);
  const auto text = read_text((f.dir / "stdout.txt").string());
  CHECK(text.rfind("ci0_lo,", 0) == 0);
  CHECK(text.find("\n") != std::string::npos);
}

TEST_CASE("configuration mistakes exit with code 2") {
  auto& f = fx();
  CHECK(f.run("") == 2);                                // missing subcommand
  CHECK(f.run("frobnicate --config " + f.config.string()) == 2);
  CHECK(f.run("uq --config /nonexistent.json") == 2);   // MissingFile
  CHECK(f.run("uq") == 2);                              // --config required

  json bad;
  bad["simulator"] = {{"name", "warp-drive"}};
  const auto bad_path = (f.dir / "bad.json").string();
  write_json(bad_path, bad);
  CHECK(f.run("uq --config " + bad_path) == 2);         // UnknownSimulator

  CHECK(f.run("--help") == 0);
}

TEST_CASE("numerical failures exit with code 3") {
  auto& f = fx();
  // A constant column defeats the degenerate-resample redraw budget.
  input_dataset flat;
  for (int i = 0; i < 10; ++i) {
    flat.add("A", 1.0);
    flat.add("B", static_cast<double>(i));
  }
  write_text((f.dir / "flat.csv").string(), flat.to_csv());
  json cfg = read_json(f.config.string());
  cfg["dataset"] = "flat.csv";
  const auto path = (f.dir / "flat_cfg.json").string();
  write_json(path, cfg);
  CHECK(f.run("design --config " + path) == 3);

  const auto err = read_text((f.dir / "stderr.txt").string());
  CHECK(err.find("ExhaustedRedraws") != std::string::npos);
}
