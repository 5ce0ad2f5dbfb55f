#include "platoon/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "platoon/format.hpp"
#include "platoon/seeding.hpp"

namespace platoon {

std::string_view to_string(ControllerKind c) {
  switch (c) {
    case ControllerKind::Consensus: return "consensus";
    case ControllerKind::Ddpg: return "ddpg";
    case ControllerKind::DdpgIntegral: return "ddpg-integral";
  }
  return "?";
}

std::optional<ControllerKind> parse_controller_kind(std::string_view name) {
  if (name == "consensus") return ControllerKind::Consensus;
  if (name == "ddpg") return ControllerKind::Ddpg;
  if (name == "ddpg-integral") return ControllerKind::DdpgIntegral;
  return std::nullopt;
}

void ScenarioConfig::validate() const {
  if (n_followers < 1) throw std::invalid_argument("scenario: n_followers must be >= 1");
  if (!(duration >= 0.0) || !std::isfinite(duration)) {
    throw std::invalid_argument("scenario: duration must be finite and >= 0");
  }
  if (!(dt > 0.0)) throw std::invalid_argument("scenario: dt must be positive");
  if (!(gap > 0.0)) throw std::invalid_argument("scenario: gap must be positive");
  if (!(std::abs(slope_deg) < 90.0)) {
    throw std::invalid_argument("scenario: |slope_deg| must be below 90");
  }
}

std::string ScenarioConfig::label() const {
  std::ostringstream os;
  os << to_string(controller) << '_' << to_string(topology) << '_'
     << (uncertainty ? "uncertain" : "nominal") << "_slope"
     << format_number(slope_deg) << "_seed" << seed;
  return os.str();
}

double Metrics::max_steady_state_error() const {
  double m = 0.0;
  for (const auto& v : vehicles) m = std::max(m, v.steady_state_error);
  return m;
}

double Metrics::mean_overshoot() const {
  if (vehicles.empty()) return 0.0;
  double s = 0.0;
  for (const auto& v : vehicles) s += v.overshoot;
  return s / static_cast<double>(vehicles.size());
}

MetricWindows MetricWindows::for_duration(double duration) {
  MetricWindows w;
  w.steady_end = duration;
  w.steady_start = std::max(0.0, duration - 10.0);
  w.overshoot_end = duration;
  w.overshoot_start = std::min(5.0, w.steady_start);
  return w;
}

Metrics compute_metrics(const Trajectory& traj, const MetricWindows& w) {
  constexpr double kSlack = 1e-9;
  if (traj.t.empty() || traj.t.front() > w.steady_start + kSlack ||
      traj.t.back() < w.steady_end - kSlack ||
      traj.t.back() < w.overshoot_end - kSlack) {
    throw std::invalid_argument(
        "compute_metrics: trajectory does not cover the metric windows");
  }
  Metrics m;
  for (std::size_t i = 0; i < traj.spacing_error.size(); ++i) {
    const auto& e = traj.spacing_error[i];
    if (e.size() != traj.t.size()) {
      throw std::invalid_argument("compute_metrics: series length mismatch");
    }
    double steady = 0.0;
    std::size_t count = 0;
    double peak = 0.0;
    for (std::size_t k = 0; k < e.size(); ++k) {
      const double t = traj.t[k];
      if (t >= w.steady_start - kSlack && t <= w.steady_end + kSlack) {
        steady += std::abs(e[k]);
        ++count;
      }
      if (t > w.overshoot_start + kSlack && t <= w.overshoot_end + kSlack) {
        peak = std::max(peak, std::abs(e[k]));
      }
    }
    if (count == 0) {
      throw std::invalid_argument("compute_metrics: empty steady-state window");
    }
    steady /= static_cast<double>(count);
    m.vehicles.push_back({static_cast<int>(i) + 1, steady,
                          std::max(0.0, peak - steady), steady < w.tolerance});
  }
  return m;
}

void TrainConfig::validate() const {
  if (episodes < 0) throw std::invalid_argument("train: episodes must be >= 0");
  if (steps < 1) throw std::invalid_argument("train: steps must be >= 1");
  if (!(dt > 0.0)) throw std::invalid_argument("train: dt must be positive");
  hyper.validate();
}

TrainOutcome train_controller(const TrainConfig& cfg,
                              const EpisodeCallback& on_episode) {
  cfg.validate();
  TrainingEnvConfig ec;
  ec.variant = cfg.variant;
  ec.dt = cfg.dt;
  ec.steps = cfg.steps;
  TrainingEnv env(ec);
  DdpgHyper hyper = cfg.hyper;
  hyper.dt = cfg.dt;
  Agent agent = make_agent(env.observation_dim(), env.action_dim(), hyper,
                           derive_seed(cfg.seed, 1));
  TrainingResult result =
      run_training(env, agent, cfg.episodes, derive_seed(cfg.seed, 2), on_episode);
  return {std::move(agent.actor), std::move(result)};
}

std::shared_ptr<const Mlp> load_actor(const std::filesystem::path& path,
                                      ControllerKind kind) {
  if (kind == ControllerKind::Consensus) return nullptr;
  auto net = std::make_shared<Mlp>(load_mlp(path));
  const Eigen::Index want = kind == ControllerKind::DdpgIntegral ? 1 : 3;
  if (net->input_dim() != want || net->output_dim() != 1) {
    throw std::invalid_argument(
        path.string() + ": actor maps " + std::to_string(net->input_dim()) +
        " inputs to " + std::to_string(net->output_dim()) + " outputs, but " +
        std::string(to_string(kind)) + " needs " + std::to_string(want) +
        " -> 1");
  }
  return net;
}

std::vector<VehicleParams> scenario_vehicle_params(const ScenarioConfig& cfg,
                                                   const VehicleParams& nominal) {
  std::vector<VehicleParams> out(static_cast<std::size_t>(cfg.n_followers) + 1,
                                 nominal);
  if (!cfg.uncertainty) return out;
  for (int i = 1; i <= cfg.n_followers; ++i) {
    out[static_cast<std::size_t>(i)] = sample_uncertain_params(
        nominal, cfg.mass_halfwidth, cfg.powertrain_halfwidth,
        derive_seed(cfg.seed, static_cast<std::uint64_t>(i)));
  }
  return out;
}

namespace {

std::vector<std::shared_ptr<const Controller>> make_controllers(
    const ScenarioConfig& cfg, const VehicleParams& nominal,
    std::shared_ptr<const Mlp> actor) {
  std::shared_ptr<const Controller> c;
  switch (cfg.controller) {
    case ControllerKind::Consensus:
      c = std::make_shared<ConsensusController>(ConsensusGains{},
                                                cfg.saturate_consensus,
                                                nominal.u_min, nominal.u_max);
      break;
    case ControllerKind::Ddpg:
      if (!actor) throw std::invalid_argument("ddpg controller needs weights");
      c = std::make_shared<DirectPolicyController>(actor, nominal.u_min,
                                                   nominal.u_max, cfg.aggregate);
      break;
    case ControllerKind::DdpgIntegral:
      if (!actor) {
        throw std::invalid_argument("ddpg-integral controller needs weights");
      }
      c = std::make_shared<IntegralPolicyController>(
          actor, nominal.du_min, nominal.du_max, nominal.u_min, nominal.u_max);
      break;
  }
  return std::vector<std::shared_ptr<const Controller>>(
      static_cast<std::size_t>(cfg.n_followers), c);
}

void write_rows(std::ostream& os, const std::vector<VehicleSample>& rows) {
  for (const auto& r : rows) {
    os << format_number(r.t) << ',' << r.vehicle_id << ','
       << format_number(r.position) << ',' << format_number(r.speed) << ','
       << format_number(r.acceleration) << ',' << format_number(r.u_applied)
       << ',' << format_number(r.spacing_error) << '\n';
  }
}

}  // namespace

RunRecord run_scenario(const ScenarioConfig& cfg,
                       std::shared_ptr<const Mlp> actor,
                       const std::optional<std::filesystem::path>& csv_dir,
                       const std::optional<std::filesystem::path>& weights_path) {
  cfg.validate();
  RunRecord rec;
  rec.config = cfg;
  rec.weights_path = weights_path;

  const VehicleParams nominal;
  PlatoonConfig pc;
  pc.topology = make_topology(cfg.topology, cfg.n_followers, cfg.gap);
  pc.nominal = nominal;
  pc.truth = scenario_vehicle_params(cfg, nominal);
  pc.externals.slope_angle = cfg.slope_deg * std::numbers::pi / 180.0;
  pc.dt = cfg.dt;
  pc.cruise_speed = cfg.cruise_speed;
  PlatoonEnv env(std::move(pc), make_controllers(cfg, nominal, std::move(actor)));

  std::ofstream csv;
  if (csv_dir) {
    std::filesystem::create_directories(*csv_dir);
    rec.trajectory_path = *csv_dir / (cfg.label() + ".csv");
    csv.open(*rec.trajectory_path, std::ios::binary);
    if (!csv) throw std::runtime_error("cannot write " + rec.trajectory_path->string());
    csv << "t,vehicle_id,position,speed,acceleration,u_applied,"
           "spacing_error_to_front\n";
  }

  const auto steps = static_cast<long>(std::llround(cfg.duration / cfg.dt));
  Trajectory traj;
  traj.spacing_error.resize(static_cast<std::size_t>(cfg.n_followers));
  const auto record = [&] {
    traj.t.push_back(env.time());
    for (int i = 1; i <= cfg.n_followers; ++i) {
      traj.spacing_error[static_cast<std::size_t>(i - 1)].push_back(
          env.spacing_error(i));
    }
    if (csv) write_rows(csv, env.snapshot());
  };

  record();
  try {
    for (long k = 0; k < steps; ++k) {
      platoon_step(env);
      record();
    }
  } catch (const std::runtime_error& e) {
    rec.diverged = true;
    rec.message = e.what();
  }
  if (steps == 0) return rec;
  if (rec.diverged) {
    for (int i = 1; i <= cfg.n_followers; ++i) {
      rec.metrics.vehicles.push_back({i, NAN, NAN, false});
    }
    return rec;
  }
  rec.metrics = compute_metrics(traj, MetricWindows::for_duration(env.time()));
  return rec;
}

// ---------------------------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(value);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw std::invalid_argument("config key '" + key + "': not a boolean: " + v);
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) {
    throw std::invalid_argument("config key '" + key + "': not a number: " + v);
  }
  return x;
}

long long parse_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long x = 0;
  try {
    x = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) {
    throw std::invalid_argument("config key '" + key + "': not an integer: " + v);
  }
  return x;
}

}  // namespace

std::map<std::string, std::string> read_key_values(std::istream& is) {
  std::map<std::string, std::string> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.resize(hash);
    }
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected 'key = value'");
    }
    std::string key = trim(std::string_view(body).substr(0, eq));
    std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": empty key");
    }
    if (!out.emplace(key, value).second) {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": duplicate key '" + key + "'");
    }
  }
  return out;
}

std::map<std::string, std::string> read_key_values(
    const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read config " + path.string());
  return read_key_values(is);
}

SweepSpec make_sweep_spec(const std::map<std::string, std::string>& kv) {
  ScenarioConfig base;
  std::vector<TopologyKind> topologies{TopologyKind::PF, TopologyKind::PFL,
                                       TopologyKind::TPF, TopologyKind::TPFL};
  std::vector<ControllerKind> controllers{ControllerKind::Consensus,
                                          ControllerKind::Ddpg,
                                          ControllerKind::DdpgIntegral};
  std::vector<bool> uncertainty{false};
  std::vector<double> slopes{0.0};
  std::vector<std::uint64_t> seeds{1};
  SweepSpec spec;

  for (const auto& [key, value] : kv) {
    if (key == "topologies") {
      topologies.clear();
      for (const auto& s : split_list(value)) {
        const auto k = parse_topology_kind(s);
        if (!k) throw std::invalid_argument("unknown topology: " + s);
        topologies.push_back(*k);
      }
    } else if (key == "controllers") {
      controllers.clear();
      for (const auto& s : split_list(value)) {
        const auto c = parse_controller_kind(s);
        if (!c) throw std::invalid_argument("unknown controller: " + s);
        controllers.push_back(*c);
      }
    } else if (key == "uncertainty") {
      uncertainty.clear();
      for (const auto& s : split_list(value)) uncertainty.push_back(parse_bool(key, s));
    } else if (key == "slope_deg") {
      slopes.clear();
      for (const auto& s : split_list(value)) slopes.push_back(parse_double(key, s));
    } else if (key == "seeds") {
      seeds.clear();
      for (const auto& s : split_list(value)) {
        seeds.push_back(static_cast<std::uint64_t>(parse_int(key, s)));
      }
    } else if (key == "n") {
      base.n_followers = static_cast<int>(parse_int(key, value));
    } else if (key == "duration") {
      base.duration = parse_double(key, value);
    } else if (key == "dt") {
      base.dt = parse_double(key, value);
    } else if (key == "gap") {
      base.gap = parse_double(key, value);
    } else if (key == "cruise_speed") {
      base.cruise_speed = parse_double(key, value);
    } else if (key == "saturate_consensus") {
      base.saturate_consensus = parse_bool(key, value);
    } else if (key == "aggregate") {
      if (value == "sum") {
        base.aggregate = DirectPolicyController::Aggregate::Sum;
      } else if (value == "mean") {
        base.aggregate = DirectPolicyController::Aggregate::Mean;
      } else {
        throw std::invalid_argument("aggregate must be sum or mean");
      }
    } else if (key == "weights_ddpg") {
      spec.weights[ControllerKind::Ddpg] = value;
    } else if (key == "weights_ddpg_integral") {
      spec.weights[ControllerKind::DdpgIntegral] = value;
    } else if (key == "csv_dir") {
      if (!value.empty()) spec.csv_dir = value;
    } else if (key == "out") {
      spec.out = value;
    } else if (key == "jobs") {
      spec.jobs = static_cast<int>(parse_int(key, value));
    } else {
      throw std::invalid_argument("unknown sweep config key: " + key);
    }
  }

  for (ControllerKind c : controllers) {
    for (TopologyKind t : topologies) {
      for (bool u : uncertainty) {
        for (double s : slopes) {
          for (std::uint64_t seed : seeds) {
            ScenarioConfig cfg = base;
            cfg.controller = c;
            cfg.topology = t;
            cfg.uncertainty = u;
            cfg.slope_deg = s;
            cfg.seed = seed;
            cfg.validate();
            spec.scenarios.push_back(cfg);
          }
        }
      }
    }
  }
  return spec;
}

std::string sweep(const SweepSpec& spec) {
  std::vector<RunRecord> records;
  return sweep(spec, records);
}

std::string sweep(const SweepSpec& spec, std::vector<RunRecord>& records) {
  std::map<ControllerKind, std::shared_ptr<const Mlp>> actors;
  for (const auto& cfg : spec.scenarios) {
    if (cfg.controller == ControllerKind::Consensus ||
        actors.count(cfg.controller)) {
      continue;
    }
    const auto it = spec.weights.find(cfg.controller);
    if (it == spec.weights.end()) {
      throw std::invalid_argument("sweep: no weights given for " +
                                  std::string(to_string(cfg.controller)));
    }
    if (!std::filesystem::exists(it->second)) {
      throw std::invalid_argument("sweep: weights file not found: " +
                                  it->second.string());
    }
    actors[cfg.controller] = load_actor(it->second, cfg.controller);
  }

  const std::size_t n = spec.scenarios.size();
  records.assign(n, RunRecord{});
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      const auto& cfg = spec.scenarios[i];
      std::optional<std::filesystem::path> wpath;
      std::shared_ptr<const Mlp> actor;
      if (cfg.controller != ControllerKind::Consensus) {
        wpath = spec.weights.at(cfg.controller);
        actor = actors.at(cfg.controller);
      }
      try {
        records[i] = run_scenario(cfg, actor, spec.csv_dir, wpath);
      } catch (const std::exception& e) {
        records[i].config = cfg;
        records[i].diverged = true;
        records[i].message = e.what();
        for (int v = 1; v <= cfg.n_followers; ++v) {
          records[i].metrics.vehicles.push_back({v, NAN, NAN, false});
        }
      }
    }
  };
  const int jobs = std::max(1, std::min<int>(spec.jobs, static_cast<int>(n)));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }

  std::ostringstream os;
  os << kMetricsHeader << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = records[i];
    for (const auto& v : r.metrics.vehicles) {
      os << i << ',' << to_string(r.config.topology) << ','
         << to_string(r.config.controller) << ',' << (r.config.uncertainty ? 1 : 0)
         << ',' << format_number(r.config.slope_deg) << ',' << r.config.seed << ','
         << v.vehicle_id << ',' << format_number(v.steady_state_error) << ','
         << format_number(v.overshoot) << ',' << (r.diverged ? 1 : 0) << '\n';
    }
  }
  return os.str();
}

}  // namespace platoon
