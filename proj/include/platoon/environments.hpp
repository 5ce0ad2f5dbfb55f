// Training and evaluation environments: the two-vehicle leader/follower
// environment used for learning, the n-vehicle platoon used for evaluation,
// both reward shapes, the averaged-neighbor observation and the integral
// action wrapper.
#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "platoon/consensus.hpp"
#include "platoon/mlp.hpp"
#include "platoon/rl_env.hpp"
#include "platoon/topology.hpp"
#include "platoon/vehicle_dynamics.hpp"

namespace platoon {

// ---------------------------------------------------------------------------
// Scalar building blocks

struct NeighborOutput {
  double output = 0.0;  // y_j
  double gap = 0.0;     // d_ij
};

/// e = y_i - mean_j (y_j - d_ij). Throws on an empty list.
double mean_error(double own_output, std::span<const NeighborOutput> neighbors);

using ErrorVector = std::array<double, 3>;  // [spacing, speed, acceleration]

/// exp(-(sum_j e_j^T diag(gamma) e_j + beta u^2)).
double reward_conventional(std::span<const ErrorVector> errors, double u,
                           const ErrorVector& gamma, double beta);

/// exp(-(kappa e^2 + beta u^2)).
double reward_integral(double error, double u, double kappa, double beta);

double saturate(double u, double u_min, double u_max);

/// sat(u_prev + du * dt).
double integrate_action(double u_prev, double du, double dt, double u_min,
                        double u_max);

/// Maps a tanh output in [-1, 1] affinely onto [lo, hi].
double scale_action(double raw, double lo, double hi);

// ---------------------------------------------------------------------------
// Learned-controller variants

enum class ActionMode { Direct, Incremental };

/// The two learned controllers: direct acceleration from the 3-component
/// error with the quadratic reward, or acceleration increments from the
/// scalar mean error with the scalar reward.
enum class Variant { Conventional, Integral };

std::string_view to_string(Variant v);
/// Accepts "ddpg" and "ddpg-integral".
std::optional<Variant> parse_variant(std::string_view name);

struct RewardParams {
  ErrorVector gamma{1.0, 1.0, 1.0};
  double kappa = 1.0;
  double beta = 0.2;
};

/// Maximal-length 16-bit LFSR sequence held for `hold` seconds per bit,
/// emitting +-amplitude.
class Prbs {
 public:
  Prbs(double amplitude, double hold, std::uint64_t seed);

  double value(double t);
  double amplitude() const { return amplitude_; }
  double hold() const { return hold_; }

 private:
  double amplitude_;
  double hold_;
  std::uint16_t register_;
  std::vector<signed char> bits_;
};

struct TrainingEnvConfig {
  Variant variant = Variant::Integral;
  double dt = 0.05;
  int steps = 1000;
  double spacing_range = 5.0;  // initial spacing error ~ U(-r, r)
  double speed_range = 2.0;    // initial speed error ~ U(-r, r)
  double prbs_amplitude = 1.0;
  double prbs_hold = 2.5;
  double gap = 5.0;
  VehicleParams nominal;
  RewardParams reward;

  ActionMode action_mode() const {
    return variant == Variant::Integral ? ActionMode::Incremental
                                        : ActionMode::Direct;
  }
  void validate() const;
};

/// Leader plus one follower on the nominal linear plant. The leader
/// accelerates by a PRBS; the follower's command comes from the agent.
/// Observation: [mean error] for the integral variant, [e_p, e_v, e_a] for
/// the conventional one.
class TrainingEnv final : public Environment {
 public:
  explicit TrainingEnv(TrainingEnvConfig cfg);

  std::size_t observation_dim() const override;
  std::size_t action_dim() const override { return 1; }
  std::vector<double> reset(std::uint64_t seed) override;
  StepResult step(std::span<const double> action) override;

  const TrainingEnvConfig& config() const { return cfg_; }
  const LinearState& leader() const { return leader_; }
  const LinearState& follower() const { return follower_; }
  double applied_u() const { return u_; }
  double time() const { return t_; }

  /// Overrides the current state; used by tests to start from known points.
  void set_state(const LinearState& leader, const LinearState& follower,
                 double u);

  ErrorVector errors() const;

 private:
  std::vector<double> observation() const;
  double leader_accel(double t);

  TrainingEnvConfig cfg_;
  std::optional<Prbs> prbs_;
  LinearState leader_, follower_;
  double u_ = 0.0;
  double t_ = 0.0;
  int k_ = 0;
};

/// Smallest reward handed out when the dynamics blow up.
inline constexpr double kFailureReward = 1e-12;

// ---------------------------------------------------------------------------
// Platoon evaluation

/// What a follower sees when choosing its command.
struct FollowerView {
  int id = 0;
  VehicleState own;
  struct Neighbor {
    int id = 0;
    VehicleState state;
    double gap = 0.0;  // desired spacing, positive when the neighbor is ahead
  };
  std::vector<Neighbor> neighbors;
  double u_prev = 0.0;
  double dt = 0.05;
};

class Controller {
 public:
  virtual ~Controller() = default;
  virtual double command(const FollowerView& view) const = 0;
};

class ConsensusController final : public Controller {
 public:
  ConsensusController(ConsensusGains gains, bool saturated, double u_min,
                      double u_max);
  double command(const FollowerView& view) const override;

 private:
  ConsensusGains gains_;
  bool saturated_;
  double u_min_, u_max_;
};

/// Conventional learned controller: u = scale(actor(e)), where e aggregates
/// the per-neighbor error vectors by sum (default) or mean.
class DirectPolicyController final : public Controller {
 public:
  enum class Aggregate { Sum, Mean };
  DirectPolicyController(std::shared_ptr<const Mlp> actor, double u_min,
                         double u_max, Aggregate aggregate = Aggregate::Sum);
  double command(const FollowerView& view) const override;

 private:
  std::shared_ptr<const Mlp> actor_;
  double u_min_, u_max_;
  Aggregate aggregate_;
};

/// Integral-action learned controller: du = scale(actor(mean error)),
/// u = sat(u_prev + du dt).
class IntegralPolicyController final : public Controller {
 public:
  IntegralPolicyController(std::shared_ptr<const Mlp> actor, double du_min,
                           double du_max, double u_min, double u_max);
  double command(const FollowerView& view) const override;

 private:
  std::shared_ptr<const Mlp> actor_;
  double du_min_, du_max_, u_min_, u_max_;
};

/// Error vector of a follower against one neighbor ahead:
/// [p_i - p_j + d_ij, v_i - v_j, a_i - a_j].
ErrorVector pair_error(const VehicleState& own, const VehicleState& neighbor,
                       double gap);

/// Leader acceleration for the evaluation step: 1 m/s^2 on (5, 10] s.
double leader_step_profile(double t);

struct PlatoonConfig {
  Topology topology;
  VehicleParams nominal;
  /// One entry per vehicle, leader first. Empty means "all nominal".
  std::vector<VehicleParams> truth;
  Externals externals;
  double dt = 0.05;
  double cruise_speed = 20.0;
};

struct VehicleSample {
  double t = 0.0;
  int vehicle_id = 0;
  double position = 0.0;
  double speed = 0.0;
  double acceleration = 0.0;
  double u_applied = 0.0;
  double spacing_error = 0.0;  // p_i - p_{i-1} + gap; 0 for the leader
};

/// n-follower platoon on the nonlinear plant. Followers start at equilibrium
/// spacing and cruise speed with zero acceleration and a zero integrator.
/// The leader is an ideal double integrator driven by `leader_profile`.
class PlatoonEnv {
 public:
  using Profile = double (*)(double);

  PlatoonEnv(PlatoonConfig cfg,
             std::vector<std::shared_ptr<const Controller>> controllers,
             Profile leader_profile = &leader_step_profile);

  const PlatoonConfig& config() const { return cfg_; }
  double time() const { return t_; }
  int n_followers() const { return cfg_.topology.n_followers; }
  const VehicleState& state(int id) const { return states_.at(std::size_t(id)); }
  double applied_u(int id) const { return u_.at(std::size_t(id)); }
  double spacing_error(int id) const;

  /// Overrides one vehicle's state (tests).
  void set_state(int id, const VehicleState& s);

  std::vector<VehicleSample> snapshot() const;

 private:
  friend void platoon_step(PlatoonEnv& env);

  FollowerView view_of(int id) const;

  PlatoonConfig cfg_;
  std::vector<std::shared_ptr<const Controller>> controllers_;
  Profile profile_;
  std::vector<VehicleState> states_;
  std::vector<double> u_;
  long steps_ = 0;
  double t_ = 0.0;
};

/// Advances every vehicle by dt. All commands are computed from the states
/// at the current time before any vehicle moves. Throws std::runtime_error
/// naming the vehicle when a state turns non-finite.
void platoon_step(PlatoonEnv& env);

}  // namespace platoon
