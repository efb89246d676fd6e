#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "stabl/simulate.hpp"

using namespace stabl;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("synthetic data is deterministic and distributionally sane") {
  ExperimentConfig cfg;
  cfg.setting = 1;
  cfg.n = 200;
  cfg.d = 10;
  cfg.master_seed = 5;
  SyntheticData a = generate_setting(cfg);
  SyntheticData b = generate_setting(cfg);
  CHECK(a.data.x == b.data.x);
  CHECK(a.data.y == b.data.y);
  CHECK(a.test_point == b.test_point);
  // responses are binary, covariates roughly standard normal
  for (int i = 0; i < cfg.n; ++i) CHECK((a.data.y(i) == 0.0 || a.data.y(i) == 1.0));
  double mean = a.data.x.mean();
  double var = (a.data.x.array() - mean).square().mean();
  CHECK(std::abs(mean) < 5.0 / std::sqrt(200.0 * 10));
  CHECK(std::abs(var - 1.0) < 0.1);

  cfg.master_seed = 6;
  SyntheticData c = generate_setting(cfg);
  CHECK(a.data.x != c.data.x);
}

TEST_CASE("setting 4 responses follow the sin-sum construction") {
  ExperimentConfig cfg;
  cfg.setting = 4;
  cfg.n = 24;
  cfg.d = 5;
  cfg.master_seed = 9;
  SyntheticData s = generate_setting(cfg);
  for (int i = 0; i < cfg.n; ++i) {
    for (int j = 0; j < cfg.d; ++j) {
      CHECK(s.data.x(i, j) >= 0.0);
      CHECK(s.data.x(i, j) < 1.0);
    }
    double base = 0.0;
    for (int j = 0; j < cfg.d; ++j) base += std::sin(s.data.x(i, j) / (j + 1));
    const int row = i + 1;
    double resid = s.data.y(i) - base;
    if (row % 3 != 1 && row % 4 != 1) {
      CHECK(resid == doctest::Approx(0.0).epsilon(1e-12));
    } else {
      // latent effects are bounded: alpha in [-.25,.25], gamma in [0,1]
      CHECK(resid >= -0.26);
      CHECK(resid <= 1.26);
    }
  }
}

TEST_CASE("experiment presets match the documented scales") {
  auto desk = ExperimentConfig::for_setting(1, false);
  CHECK(desk.n == 200);
  CHECK(desk.d == 50);
  CHECK(desk.bags == 1000);
  CHECK(desk.m == 100);
  auto paper1 = ExperimentConfig::for_setting(1, true);
  CHECK(paper1.n == 500);
  CHECK(paper1.d == 200);
  CHECK(paper1.bags == 10000);
  CHECK(paper1.m == 250);
  auto paper2 = ExperimentConfig::for_setting(2, true);
  CHECK(paper2.n == 1000);
  CHECK(paper2.m == 500);
  auto paper4 = ExperimentConfig::for_setting(4, true);
  CHECK(paper4.d == 40);
  CHECK(ExperimentConfig::for_setting(3, false).learner().spec == "mlp:20,0.2,4");
  CHECK(ExperimentConfig::for_setting(4, false).learner().spec == "tree:50");
  CHECK_THROWS_AS(ExperimentConfig::for_setting(5, false).learner(), ConfigError);
}

TEST_CASE("a small simulation runs end to end, deterministically, with artifacts") {
  ExperimentConfig cfg;
  cfg.setting = 4;
  cfg.n = 24;
  cfg.d = 4;
  cfg.bags = 40;
  cfg.m = 12;
  cfg.master_seed = 3;
  auto dir = std::filesystem::temp_directory_path() / "sim_out";
  std::filesystem::remove_all(dir);
  cfg.out_dir = dir.string();
  SimulationResult res = run_simulation(cfg);
  CHECK(res.base.n == 24);
  CHECK(res.bagged.n == 24);
  CHECK(res.threshold == doctest::Approx(stability_threshold(res.bound_params)).epsilon(1e-15));
  CHECK(res.inflation == doctest::Approx(finite_b_inflation(40, 0.05)).epsilon(1e-15));
  for (const char* name : {"loo_base.csv", "loo_bagged.csv", "curve_base.csv", "curve_bagged.csv",
                           "theory.csv", "report.json"})
    CHECK(std::filesystem::exists(dir / name));

  // byte-identical on a re-run
  std::string report = slurp((dir / "report.json").string());
  std::string loo = slurp((dir / "loo_bagged.csv").string());
  run_simulation(cfg);
  CHECK(slurp((dir / "report.json").string()) == report);
  CHECK(slurp((dir / "loo_bagged.csv").string()) == loo);
  std::filesystem::remove_all(dir);
}

TEST_CASE("bagging does not degrade the mean stability of an unstable base (smoke)") {
  // tiny logistic setting: the subbagged mean perturbation should obey the
  // closed-form mean bound for bounded outputs
  ExperimentConfig cfg;
  cfg.setting = 1;
  cfg.n = 30;
  cfg.d = 3;
  cfg.bags = 200;
  cfg.m = 15;
  cfg.master_seed = 11;
  SimulationResult res = run_simulation(cfg);
  double mean = res.bagged.perturbations.mean();
  // mean L_i <= sqrt(c) + Monte Carlo slack (outputs lie in [0,1])
  CHECK(mean <= std::sqrt(res.threshold) + 2.0 * res.inflation);
}
