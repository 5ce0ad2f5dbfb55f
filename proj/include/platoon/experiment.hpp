// Scenario orchestration: build a platoon for one configuration, simulate
// it, score the spacing errors, and run grids of scenarios into a metrics
// table.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "platoon/ddpg.hpp"
#include "platoon/environments.hpp"
#include "platoon/mlp.hpp"
#include "platoon/topology.hpp"

namespace platoon {

enum class ControllerKind { Consensus, Ddpg, DdpgIntegral };

std::string_view to_string(ControllerKind c);
/// consensus | ddpg | ddpg-integral
std::optional<ControllerKind> parse_controller_kind(std::string_view name);

struct ScenarioConfig {
  TopologyKind topology = TopologyKind::PF;
  int n_followers = 9;
  ControllerKind controller = ControllerKind::Consensus;
  bool uncertainty = false;
  double mass_halfwidth = 300.0;        // kg
  double powertrain_halfwidth = 0.1;    // s
  double slope_deg = 0.0;
  std::uint64_t seed = 1;
  double duration = 50.0;
  double dt = 0.05;
  double gap = 5.0;
  double cruise_speed = 20.0;
  bool saturate_consensus = true;
  DirectPolicyController::Aggregate aggregate =
      DirectPolicyController::Aggregate::Sum;

  void validate() const;
  /// Stable file-name friendly label, e.g. "consensus_pf_nominal_slope0_seed1".
  std::string label() const;
};

struct VehicleMetrics {
  int vehicle_id = 0;
  double steady_state_error = 0.0;  // mean |spacing error| over the steady window
  double overshoot = 0.0;           // peak |spacing error| after the step minus steady value
  bool settled = false;             // steady_state_error below the tolerance
};

struct Metrics {
  std::vector<VehicleMetrics> vehicles;

  double max_steady_state_error() const;
  double mean_overshoot() const;
};

/// Spacing-error time series per follower; spacing_error[i][k] belongs to
/// follower i + 1 at time t[k].
struct Trajectory {
  std::vector<double> t;
  std::vector<std::vector<double>> spacing_error;
};

struct MetricWindows {
  double steady_start = 40.0;
  double steady_end = 50.0;
  double overshoot_start = 5.0;  // exclusive
  double overshoot_end = 50.0;
  double tolerance = 0.05;  // m

  static MetricWindows for_duration(double duration);
};

/// Throws std::invalid_argument when the trajectory does not cover the
/// windows.
Metrics compute_metrics(const Trajectory& traj, const MetricWindows& w = {});

struct RunRecord {
  ScenarioConfig config;
  Metrics metrics;
  bool diverged = false;
  std::string message;
  std::optional<std::filesystem::path> trajectory_path;
  std::optional<std::filesystem::path> weights_path;
};

struct TrainConfig {
  Variant variant = Variant::Integral;
  int episodes = 300;
  int steps = 1000;
  double dt = 0.05;
  std::uint64_t seed = 1;
  DdpgHyper hyper;

  void validate() const;
};

struct TrainOutcome {
  Mlp actor;
  TrainingResult result;
};

/// Trains one learned controller on the two-vehicle environment. Both
/// variants derive their agent and episode seeds from `seed` the same way.
TrainOutcome train_controller(const TrainConfig& cfg,
                              const EpisodeCallback& on_episode = {});

/// Loads an actor network and checks it matches the controller kind.
std::shared_ptr<const Mlp> load_actor(const std::filesystem::path& path,
                                      ControllerKind kind);

/// Per-vehicle parameters for a scenario: all nominal, or (with
/// uncertainty) mass and power-train constant drawn once per follower.
std::vector<VehicleParams> scenario_vehicle_params(const ScenarioConfig& cfg,
                                                   const VehicleParams& nominal);

/// Simulates one scenario. Learned controllers need `actor`. When `csv_dir`
/// is set, writes "<label>.csv" there with columns
/// t,vehicle_id,position,speed,acceleration,u_applied,spacing_error_to_front.
/// Divergence is reported in the record rather than thrown.
RunRecord run_scenario(const ScenarioConfig& cfg,
                       std::shared_ptr<const Mlp> actor = nullptr,
                       const std::optional<std::filesystem::path>& csv_dir = {},
                       const std::optional<std::filesystem::path>& weights_path = {});

/// Parses "key = value" lines; '#' starts a comment. Throws on lines without
/// '=' or duplicate keys.
std::map<std::string, std::string> read_key_values(std::istream& is);
std::map<std::string, std::string> read_key_values(const std::filesystem::path& path);

struct SweepSpec {
  std::vector<ScenarioConfig> scenarios;
  std::map<ControllerKind, std::filesystem::path> weights;
  std::optional<std::filesystem::path> csv_dir;
  std::filesystem::path out = "metrics.csv";
  int jobs = 1;
};

/// Builds the scenario grid from a config map. Recognised keys:
/// topologies, controllers, uncertainty, slope_deg, seeds (comma lists);
/// n, duration, dt, gap, cruise_speed, saturate_consensus, aggregate,
/// weights_ddpg, weights_ddpg_integral, csv_dir, out, jobs. Grid order is
/// controller, topology, uncertainty, slope, seed (outermost first).
SweepSpec make_sweep_spec(const std::map<std::string, std::string>& kv);

inline constexpr std::string_view kMetricsHeader =
    "scenario_id,topology,controller,uncertainty,slope_deg,seed,vehicle_id,"
    "ss_error_m,overshoot_m,diverged";

/// Runs every scenario (up to `jobs` at once) and returns the metrics CSV
/// text, one row per (scenario, follower) in grid order.
std::string sweep(const SweepSpec& spec);

/// Same as sweep() but also returns the per-run records.
std::string sweep(const SweepSpec& spec, std::vector<RunRecord>& records);

}  // namespace platoon
