// Command-line front end: train, eval, analyze, sweep.
#include <CLI11.hpp>

#include <algorithm>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "platoon/environments.hpp"
#include "platoon/experiment.hpp"
#include "platoon/format.hpp"
#include "platoon/mlp.hpp"
#include "platoon/stability.hpp"
#include "platoon/topology.hpp"

namespace {

using namespace platoon;

struct TrainArgs {
  std::string variant = "ddpg-integral";
  int episodes = 300;
  int steps = 1000;
  double dt = 0.05;
  std::uint64_t seed = 1;
  double actor_lr = 1e-4;
  double critic_lr = 1e-4;
  std::string out;
  std::string trace;
  bool quiet = false;
};

struct EvalArgs {
  std::string controller = "consensus";
  std::string topology = "pf";
  int n = 9;
  bool uncertainty = false;
  double slope_deg = 0.0;
  std::string weights;
  std::uint64_t seed = 1;
  std::string csv_dir;
  std::string out;
  double duration = 50.0;
  double dt = 0.05;
  double gap = 5.0;
  double cruise_speed = 20.0;
  bool no_saturation = false;
  std::string aggregate = "sum";
};

struct AnalyzeArgs {
  std::string weights;
  double range = 3.0;
  double eps = 0.01;
  int samples = 601;
  double powertrain = 0.3;
  std::string nyquist_csv;
};

struct SweepArgs {
  std::string config;
  std::string out;
  int jobs = 0;
};

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

int run_train(const TrainArgs& a) {
  const auto variant = parse_variant(a.variant);
  if (!variant) throw CLI::ValidationError("--variant", "must be ddpg or ddpg-integral");
  TrainConfig cfg;
  cfg.variant = *variant;
  cfg.episodes = a.episodes;
  cfg.steps = a.steps;
  cfg.dt = a.dt;
  cfg.seed = a.seed;
  cfg.hyper.actor_lr = a.actor_lr;
  cfg.hyper.critic_lr = a.critic_lr;
  const auto outcome = train_controller(cfg, [&](int ep, double reward) {
    if (!a.quiet) {
      std::cerr << "episode " << ep + 1 << "/" << a.episodes
                << " reward " << format_number(reward) << '\n';
    }
  });
  const std::filesystem::path out(a.out);
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  save_mlp(out, outcome.actor);
  std::filesystem::path trace = a.trace;
  if (trace.empty()) {
    trace = out;
    trace.replace_extension(".rewards.csv");
  }
  write_reward_trace(trace, outcome.result.episode_rewards);
  std::cout << "weights " << out.string() << "\ntrace " << trace.string() << '\n';
  if (outcome.result.diverged) {
    std::cerr << "training diverged: " << outcome.result.message << '\n';
    return 3;
  }
  return 0;
}

int run_eval(const EvalArgs& a) {
  ScenarioConfig cfg;
  const auto controller = parse_controller_kind(a.controller);
  if (!controller) {
    throw CLI::ValidationError("--controller", "must be consensus, ddpg or ddpg-integral");
  }
  cfg.controller = *controller;
  const auto topology = parse_topology_kind(a.topology);
  if (!topology) throw CLI::ValidationError("--topology", "must be pf, pfl, tpf or tpfl");
  cfg.topology = *topology;
  cfg.n_followers = a.n;
  cfg.uncertainty = a.uncertainty;
  cfg.slope_deg = a.slope_deg;
  cfg.seed = a.seed;
  cfg.duration = a.duration;
  cfg.dt = a.dt;
  cfg.gap = a.gap;
  cfg.cruise_speed = a.cruise_speed;
  cfg.saturate_consensus = !a.no_saturation;
  if (a.aggregate == "sum") {
    cfg.aggregate = DirectPolicyController::Aggregate::Sum;
  } else if (a.aggregate == "mean") {
    cfg.aggregate = DirectPolicyController::Aggregate::Mean;
  } else {
    throw CLI::ValidationError("--aggregate", "must be sum or mean");
  }
  cfg.validate();

  SweepSpec spec;
  spec.scenarios.push_back(cfg);
  if (cfg.controller != ControllerKind::Consensus) {
    if (a.weights.empty()) {
      throw std::invalid_argument(std::string(to_string(cfg.controller)) +
                                  " needs --weights");
    }
    spec.weights[cfg.controller] = a.weights;
  }
  if (!a.csv_dir.empty()) spec.csv_dir = a.csv_dir;
  std::vector<RunRecord> records;
  const std::string table = sweep(spec, records);
  if (!a.out.empty()) write_text(a.out, table);
  std::cout << table;
  const RunRecord& r = records.front();
  if (r.trajectory_path) std::cerr << "trajectory " << r.trajectory_path->string() << '\n';
  if (r.diverged) {
    std::cerr << "simulation diverged: " << r.message << '\n';
    return 3;
  }
  return 0;
}

int run_analyze(const AnalyzeArgs& a) {
  const Mlp actor = load_mlp(a.weights);
  if (actor.output_dim() != 1) {
    throw std::invalid_argument("analyze: actor must have one output");
  }
  if (actor.input_dim() != 1) {
    throw std::invalid_argument(
        "analyze: the circle criterion needs a scalar-input policy; this actor "
        "takes " + std::to_string(actor.input_dim()) + " inputs");
  }
  const VehicleParams nominal;
  // The controller integrates du = policy(e) with e = y - reference, so the
  // feedback nonlinearity seen by s^-1 G(s) is the negated scaled policy.
  const auto psi = [&](double e) {
    const double raw = forward(actor, std::span<const double>(&e, 1)).front();
    return -scale_action(raw, nominal.du_min, nominal.du_max);
  };
  const SectorEstimate est = estimate_sector(psi, a.range, a.eps, a.samples);
  const TransferFunction tf = augment_integrator(plant_tf(a.powertrain));
  const std::vector<double> grid = default_omega_grid();

  if (!a.nyquist_csv.empty()) {
    std::string csv = "omega,re,im\n";
    for (const auto& p : nyquist_samples(tf, grid).points) {
      csv += format_number(p.omega) + ',' + format_number(p.value.real()) + ',' +
             format_number(p.value.imag()) + '\n';
    }
    write_text(a.nyquist_csv, csv);
  }

  std::cout << "plant s^-1 G(s), powertrain " << format_number(a.powertrain) << '\n'
            << "sector k_low " << format_number(est.bounds.k_low) << " k_high "
            << format_number(est.bounds.k_high) << '\n'
            << "offset " << format_number(est.offset) << '\n';
  if (!(est.bounds.k_low > 0.0) || !(est.bounds.k_high > est.bounds.k_low)) {
    std::cout << "circle none\nverdict not-certified (sector needs 0 < k_low < k_high)\n"
              << "margin nan\n";
    return 0;
  }
  const CircleVerdict v = circle_criterion_check(tf, est.bounds, grid);
  std::cout << "circle center " << format_number(v.disk.center_re) << ' '
            << format_number(v.disk.center_im) << " radius "
            << format_number(v.disk.radius) << '\n'
            << "encirclements " << v.encirclements << " rhp_poles " << v.rhp_poles
            << '\n'
            << "verdict " << (v.certified ? "certified" : "not-certified") << '\n'
            << "margin " << format_number(v.margin) << '\n';
  return 0;
}

int run_sweep(const SweepArgs& a) {
  SweepSpec spec = make_sweep_spec(read_key_values(a.config));
  if (!a.out.empty()) spec.out = a.out;
  if (a.jobs > 0) spec.jobs = a.jobs;
  std::vector<RunRecord> records;
  const std::string table = sweep(spec, records);
  write_text(spec.out, table);
  std::size_t diverged = 0;
  for (const auto& r : records) diverged += r.diverged ? 1 : 0;
  std::cout << "runs " << records.size() << " diverged " << diverged << "\nmetrics "
            << spec.out.string() << '\n';
  return 0;
}

bool config_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw std::invalid_argument("config key '" + key + "': not a boolean: " + v);
}

// Turns the subcommand's `--config F` into explicit arguments. Keys already
// present on the command line are skipped, so flags override the file.
std::vector<std::string> expand_config(const CLI::App& sub,
                                       std::vector<std::string> args) {
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (!path) return args;
  const auto given = [&](const std::string& flag) {
    for (const auto& a : args) {
      if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    }
    return false;
  };
  std::vector<std::string> extra;
  for (const auto& [key, value] : read_key_values(std::filesystem::path(*path))) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    if (flag == "--config") throw std::invalid_argument("config files cannot nest");
    const CLI::Option* opt = sub.get_option_no_throw(flag);
    if (opt == nullptr) throw std::invalid_argument("unknown config key: " + key);
    if (given(flag)) continue;
    if (opt->get_expected_min() == 0) {
      if (config_bool(key, value)) extra.push_back(flag);
    } else {
      extra.push_back(flag);
      extra.push_back(value);
    }
  }
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Longitudinal platoon control: consensus and learned controllers"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a learned controller");
  std::string config_file;
  train->add_option("--config", config_file, "key = value file; flags override it");
  train->add_option("--variant", ta.variant, "ddpg | ddpg-integral")->capture_default_str();
  train->add_option("--episodes", ta.episodes)->capture_default_str();
  train->add_option("--steps", ta.steps, "Steps per episode")->capture_default_str();
  train->add_option("--dt", ta.dt)->capture_default_str();
  train->add_option("--seed", ta.seed)->capture_default_str();
  train->add_option("--actor-lr", ta.actor_lr)->capture_default_str();
  train->add_option("--critic-lr", ta.critic_lr)->capture_default_str();
  train->add_option("--out", ta.out, "Actor weights file")->required();
  train->add_option("--trace", ta.trace, "Reward trace CSV (default <out>.rewards.csv)");
  train->add_flag("--quiet", ta.quiet, "No per-episode progress");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Simulate one platoon scenario");
  eval->add_option("--config", config_file, "key = value file; flags override it");
  eval->add_option("--controller", ea.controller, "consensus | ddpg | ddpg-integral")
      ->capture_default_str();
  eval->add_option("--topology", ea.topology, "pf | pfl | tpf | tpfl")
      ->capture_default_str()
      ->check(CLI::IsMember({"pf", "pfl", "tpf", "tpfl"}));
  eval->add_option("--n", ea.n, "Number of followers")->capture_default_str();
  eval->add_flag("--uncertainty", ea.uncertainty, "Sample mass and power-train constant");
  eval->add_option("--slope-deg", ea.slope_deg)->capture_default_str();
  eval->add_option("--weights", ea.weights, "Actor weights file");
  eval->add_option("--seed", ea.seed)->capture_default_str();
  eval->add_option("--csv-dir", ea.csv_dir, "Directory for the trajectory CSV");
  eval->add_option("--out", ea.out, "Metrics CSV file");
  eval->add_option("--duration", ea.duration)->capture_default_str();
  eval->add_option("--dt", ea.dt)->capture_default_str();
  eval->add_option("--gap", ea.gap)->capture_default_str();
  eval->add_option("--cruise-speed", ea.cruise_speed)->capture_default_str();
  eval->add_flag("--no-saturation", ea.no_saturation, "Unsaturated consensus law");
  eval->add_option("--aggregate", ea.aggregate, "sum | mean (ddpg only)")
      ->capture_default_str();

  AnalyzeArgs aa;
  auto* analyze = app.add_subcommand("analyze", "Sector and circle-criterion check of a policy");
  analyze->add_option("--weights", aa.weights, "Actor weights file")
      ->required()
      ->check(CLI::ExistingFile);
  analyze->add_option("--range", aa.range)->capture_default_str();
  analyze->add_option("--eps", aa.eps)->capture_default_str();
  analyze->add_option("--samples", aa.samples)->capture_default_str();
  analyze->add_option("--powertrain", aa.powertrain)->capture_default_str();
  analyze->add_option("--nyquist-csv", aa.nyquist_csv, "Write omega,re,im samples");

  SweepArgs sa;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run a scenario grid");
  sweep_cmd->add_option("--config", sa.config, "Grid file")
      ->required()
      ->check(CLI::ExistingFile);
  sweep_cmd->add_option("--out", sa.out, "Metrics CSV (overrides the config)");
  sweep_cmd->add_option("--jobs", sa.jobs, "Parallel runs (overrides the config)");

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    if (!args.empty() && (args[0] == "train" || args[0] == "eval")) {
      const CLI::App& sub = args[0] == "train" ? *train : *eval;
      args = expand_config(sub, std::move(args));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  // CLI11 consumes a reversed argument vector.
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*train) return run_train(ta);
    if (*eval) return run_eval(ea);
    if (*analyze) return run_analyze(aa);
    if (*sweep_cmd) return run_sweep(sa);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
