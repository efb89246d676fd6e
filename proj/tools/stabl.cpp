// stabl: stability auditing for bagged black-box learners.
//
// Subcommands:
//   audit     leave-one-out stability audit of a bagged learner on a dataset
//   simulate  run one of the built-in simulation settings and emit artifacts
//   bound     closed-form stability bounds as JSON
//   phase     phase-diagram CSV (guarantee vs tightness boundaries)
//
// Exit codes: 0 success, 2 validation error, 3 certificate violation (--check).

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "stabl/io.hpp"
#include "stabl/simulate.hpp"

namespace {

stabl::BagMode parse_mode(const std::string& spec) {
  auto colon = spec.find(':');
  std::string head = spec.substr(0, colon);
  std::map<std::string, std::string> kv;
  if (colon != std::string::npos) {
    std::stringstream rest(spec.substr(colon + 1));
    std::string item;
    while (std::getline(rest, item, ',')) {
      auto eq = item.find('=');
      if (eq == std::string::npos) throw stabl::ConfigError("mode spec: expected key=value");
      kv[item.substr(0, eq)] = item.substr(eq + 1);
    }
  }
  if (head == "mc") {
    stabl::MonteCarloMode mc;
    if (kv.count("B")) mc.bags = std::stol(kv["B"]);
    if (kv.count("seed")) mc.master_seed = std::stoull(kv["seed"]);
    return mc;
  }
  if (head == "exact") {
    stabl::ExactMode ex;
    if (kv.count("limit")) ex.limit = std::stoull(kv["limit"]);
    if (kv.count("quadrature")) ex.xi_quadrature = std::stoi(kv["quadrature"]);
    return ex;
  }
  throw stabl::ConfigError("mode spec must be mc:... or exact:...");
}

stabl::IntervalMap parse_clip(const std::string& spec) {
  if (spec == "range") return {stabl::ClipRule::EmpiricalRange, 1};
  if (spec.rfind("trim:", 0) == 0)
    return {stabl::ClipRule::TrimmedRange, std::stoi(spec.substr(5))};
  throw stabl::ConfigError("clip spec must be 'range' or 'trim:k'");
}

Eigen::VectorXd parse_point(const std::string& spec, int d) {
  std::vector<double> vals;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) vals.push_back(std::stod(item));
  if (static_cast<int>(vals.size()) != d)
    throw stabl::ConfigError("--x must have one value per covariate column");
  return Eigen::Map<Eigen::VectorXd>(vals.data(), vals.size());
}

int run_audit(const std::string& data_path, const std::string& learner_spec,
              const std::string& scheme_spec, const std::string& mode_spec,
              const std::string& x_spec, const std::string& clip_spec, const std::string& out_dir,
              bool check) {
  stabl::Dataset data = stabl::load_dataset(data_path);
  stabl::BaggedPredictor pred{stabl::parse_learner(learner_spec, data.n()),
                              stabl::parse_scheme(scheme_spec, data.n()), parse_mode(mode_spec),
                              std::nullopt};
  if (!clip_spec.empty()) pred.clip = parse_clip(clip_spec);
  Eigen::VectorXd x = parse_point(x_spec, data.d());

  stabl::StabilityProfile profile = stabl::audit(pred, data, x);
  stabl::json rep = stabl::profile_report(pred, profile, true);

  stabl::BoundParams params;
  params.n = data.n();
  params.p = stabl::inclusion_probability(pred.scheme);
  params.q = stabl::pair_covariance_deficit(pred.scheme);
  double threshold = stabl::stability_threshold(params);
  rep["guarantee_threshold"] = threshold;

  bool violated = false;
  if (check) {
    double sup = stabl::sup_eps2_delta(profile);
    rep["sup_eps2_delta"] = sup;
    violated = sup > threshold + 1e-12;
    rep["certificate_ok"] = !violated;
  }
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    stabl::write_json(rep, out_dir + "/report.json");
    stabl::write_perturbations_csv(profile, out_dir + "/loo.csv");
    stabl::write_curve_csv(profile, out_dir + "/curve.csv");
  } else {
    std::cout << rep.dump(2) << "\n";
  }
  return violated ? 3 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stability auditing for bagged black-box learners"};
  app.require_subcommand(1);

  auto* audit_cmd = app.add_subcommand("audit", "leave-one-out stability audit");
  std::string data_path, learner_spec, scheme_spec, x_spec, out_dir, clip_spec;
  std::string mode_spec = "mc:B=10000,seed=1";
  bool check = false;
  audit_cmd->add_option("--data", data_path, "dataset CSV (header x_1..x_d,y)")->required();
  audit_cmd->add_option("--learner", learner_spec, "learner spec, e.g. tree:50")->required();
  audit_cmd->add_option("--scheme", scheme_spec, "scheme spec, e.g. subbag:100")->required();
  audit_cmd->add_option("--mode", mode_spec, "mc:B=...,seed=... or exact:limit=...");
  audit_cmd->add_option("--x", x_spec, "test covariate, comma separated")->required();
  audit_cmd->add_option("--clip", clip_spec, "'range' or 'trim:k'");
  audit_cmd->add_option("--out", out_dir, "output directory (default: JSON to stdout)");
  audit_cmd->add_flag("--check", check, "verify the guarantee certificate; exit 3 on violation");

  auto* sim_cmd = app.add_subcommand("simulate", "run a built-in simulation setting");
  int setting = 1;
  bool paper_scale = false;
  long sim_b = -1;
  int sim_n = -1, sim_d = -1, sim_m = -1;
  std::uint64_t sim_seed = 1;
  std::string sim_out;
  sim_cmd->add_option("--setting", setting, "setting 1..4")->required();
  sim_cmd->add_option("--n", sim_n, "sample size override");
  sim_cmd->add_option("--d", sim_d, "dimension override");
  sim_cmd->add_option("--B", sim_b, "number of bags override");
  sim_cmd->add_option("--m", sim_m, "bag size override");
  sim_cmd->add_option("--seed", sim_seed, "master seed");
  sim_cmd->add_flag("--paper-scale", paper_scale, "full-size experiment parameters");
  sim_cmd->add_option("--out", sim_out, "output directory")->required();

  auto* bound_cmd = app.add_subcommand("bound", "closed-form stability bounds");
  int bn = 0;
  double bp = 0.0, bq = 0.0, beps = -1.0, bdelta = -1.0, bdprime = 0.05;
  long bb = -1;
  bound_cmd->add_option("--n", bn)->required();
  bound_cmd->add_option("--p", bp)->required();
  bound_cmd->add_option("--q", bq)->required();
  bound_cmd->add_option("--eps", beps, "report guaranteed delta at this epsilon");
  bound_cmd->add_option("--delta", bdelta, "report guaranteed epsilon at this delta");
  bound_cmd->add_option("--B", bb, "include finite-B inflation and beta");
  bound_cmd->add_option("--dprime", bdprime, "Monte Carlo slack (default 0.05)");

  auto* phase_cmd = app.add_subcommand("phase", "phase diagram CSV");
  int pn = 0, pm = 0;
  std::string grid_spec = "0.001,0.499,200", phase_out;
  phase_cmd->add_option("--n", pn)->required();
  phase_cmd->add_option("--m", pm)->required();
  phase_cmd->add_option("--grid", grid_spec, "lo,hi,points (log spaced)");
  phase_cmd->add_option("--out", phase_out, "output CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*audit_cmd)
      return run_audit(data_path, learner_spec, scheme_spec, mode_spec, x_spec, clip_spec, out_dir,
                       check);
    if (*sim_cmd) {
      stabl::ExperimentConfig cfg = stabl::ExperimentConfig::for_setting(setting, paper_scale);
      if (sim_n > 0) cfg.n = sim_n;
      if (sim_d > 0) cfg.d = sim_d;
      if (sim_b > 0) cfg.bags = sim_b;
      if (sim_m > 0) cfg.m = sim_m;
      cfg.master_seed = sim_seed;
      cfg.out_dir = sim_out;
      stabl::run_simulation(cfg);
      return 0;
    }
    if (*bound_cmd) {
      stabl::BoundParams params{bn, bp, bq};
      stabl::json rep;
      rep["n"] = bn;
      rep["p"] = bp;
      rep["q"] = bq;
      rep["threshold"] = stabl::stability_threshold(params);
      if (beps > 0.0) rep["guaranteed_delta"] = stabl::guaranteed_delta(params, beps);
      if (bdelta > 0.0) rep["guaranteed_epsilon"] = stabl::guaranteed_epsilon(params, bdelta);
      rep["beta_infinite_B"] = stabl::expectation_beta(params);
      if (bb > 0) {
        rep["B"] = bb;
        rep["mc_inflation"] = stabl::finite_b_inflation(bb, bdprime);
        rep["beta"] = stabl::expectation_beta(params, static_cast<double>(bb));
      }
      std::cout << rep.dump(2) << "\n";
      return 0;
    }
    if (*phase_cmd) {
      std::stringstream ss(grid_spec);
      std::string lo, hi, pts;
      if (!std::getline(ss, lo, ',') || !std::getline(ss, hi, ',') || !std::getline(ss, pts, ','))
        throw stabl::ConfigError("--grid must be lo,hi,points");
      auto grid = stabl::log_spaced_grid(std::stod(lo), std::stod(hi), std::stoi(pts));
      auto [guarantee, tightness] = stabl::phase_diagram(pn, pm, grid);
      stabl::write_phase_csv(guarantee, tightness, phase_out);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
