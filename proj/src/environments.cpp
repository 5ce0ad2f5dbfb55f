#include "platoon/environments.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "platoon/seeding.hpp"

namespace platoon {

double mean_error(double own_output, std::span<const NeighborOutput> neighbors) {
  if (neighbors.empty()) {
    throw std::invalid_argument("mean_error: neighbor list is empty");
  }
  double sum = 0.0;
  for (const auto& n : neighbors) sum += n.output - n.gap;
  return own_output - sum / static_cast<double>(neighbors.size());
}

double reward_conventional(std::span<const ErrorVector> errors, double u,
                           const ErrorVector& gamma, double beta) {
  double exponent = beta * u * u;
  for (const auto& e : errors) {
    for (std::size_t k = 0; k < 3; ++k) exponent += gamma[k] * e[k] * e[k];
  }
  return std::exp(-exponent);
}

double reward_integral(double error, double u, double kappa, double beta) {
  return std::exp(-(kappa * error * error + beta * u * u));
}

double saturate(double u, double u_min, double u_max) {
  return std::clamp(u, u_min, u_max);
}

double integrate_action(double u_prev, double du, double dt, double u_min,
                        double u_max) {
  return saturate(u_prev + du * dt, u_min, u_max);
}

double scale_action(double raw, double lo, double hi) {
  return lo + 0.5 * (std::clamp(raw, -1.0, 1.0) + 1.0) * (hi - lo);
}

std::string_view to_string(Variant v) {
  return v == Variant::Integral ? "ddpg-integral" : "ddpg";
}

std::optional<Variant> parse_variant(std::string_view name) {
  if (name == "ddpg") return Variant::Conventional;
  if (name == "ddpg-integral") return Variant::Integral;
  return std::nullopt;
}

// ---------------------------------------------------------------------------

Prbs::Prbs(double amplitude, double hold, std::uint64_t seed)
    : amplitude_(amplitude), hold_(hold) {
  if (!(hold > 0.0)) throw std::invalid_argument("Prbs: hold must be positive");
  register_ = static_cast<std::uint16_t>(mix_seed(seed) & 0xffffu);
  if (register_ == 0) register_ = 0xace1u;
}

double Prbs::value(double t) {
  if (t < 0.0) t = 0.0;
  const auto index = static_cast<std::size_t>(std::floor(t / hold_));
  while (bits_.size() <= index) {
    // Fibonacci LFSR, taps 16 14 13 11 (maximal length 65535).
    const unsigned fb = (register_ ^ (register_ >> 2) ^ (register_ >> 3) ^
                         (register_ >> 5)) & 1u;
    register_ = static_cast<std::uint16_t>((register_ >> 1) | (fb << 15));
    bits_.push_back((register_ & 1u) ? 1 : -1);
  }
  return amplitude_ * bits_[index];
}

void TrainingEnvConfig::validate() const {
  nominal.validate();
  if (!(dt > 0.0) || steps < 1) {
    throw std::invalid_argument("TrainingEnvConfig: need dt > 0 and steps >= 1");
  }
  if (!(spacing_range >= 0.0) || !(speed_range >= 0.0) ||
      !std::isfinite(spacing_range) || !std::isfinite(speed_range)) {
    throw std::invalid_argument("TrainingEnvConfig: reset ranges must be finite");
  }
  if (!(reward.beta > 0.0) || !(reward.kappa > 0.0) ||
      std::any_of(reward.gamma.begin(), reward.gamma.end(),
                  [](double g) { return !(g > 0.0); })) {
    throw std::invalid_argument("TrainingEnvConfig: reward weights must be > 0");
  }
}

TrainingEnv::TrainingEnv(TrainingEnvConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
}

std::size_t TrainingEnv::observation_dim() const {
  return cfg_.variant == Variant::Integral ? 1 : 3;
}

double TrainingEnv::leader_accel(double t) {
  return prbs_ ? prbs_->value(t + 0.5 * cfg_.dt) : 0.0;
}

std::vector<double> TrainingEnv::reset(std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 0));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double ep = cfg_.spacing_range * unit(rng);
  const double ev = cfg_.speed_range * unit(rng);
  prbs_.emplace(cfg_.prbs_amplitude, cfg_.prbs_hold, derive_seed(seed, 1));
  t_ = 0.0;
  k_ = 0;
  u_ = 0.0;
  leader_ = {0.0, 0.0, leader_accel(0.0)};
  follower_ = {-cfg_.gap + ep, ev, leader_.acceleration};
  return observation();
}

void TrainingEnv::set_state(const LinearState& leader,
                            const LinearState& follower, double u) {
  leader_ = leader;
  follower_ = follower;
  u_ = u;
}

ErrorVector TrainingEnv::errors() const {
  return {follower_.position - leader_.position + cfg_.gap,
          follower_.speed - leader_.speed,
          follower_.acceleration - leader_.acceleration};
}

std::vector<double> TrainingEnv::observation() const {
  if (cfg_.variant == Variant::Integral) {
    const NeighborOutput n{observe(leader_), cfg_.gap};
    return {mean_error(observe(follower_), {&n, 1})};
  }
  const ErrorVector e = errors();
  return {e[0], e[1], e[2]};
}

StepResult TrainingEnv::step(std::span<const double> action) {
  if (action.size() != 1) {
    throw std::invalid_argument("TrainingEnv::step: expected one action");
  }
  const VehicleParams& p = cfg_.nominal;
  if (cfg_.action_mode() == ActionMode::Incremental) {
    const double du = scale_action(action[0], p.du_min, p.du_max);
    u_ = integrate_action(u_, du, cfg_.dt, p.u_min, p.u_max);
  } else {
    u_ = scale_action(action[0], p.u_min, p.u_max);
  }

  StepResult out;
  try {
    follower_ = step_linear(follower_, u_, p.powertrain_constant, cfg_.dt);
    const double a0 = leader_.acceleration;
    leader_ = step_rk4(leader_, cfg_.dt, [a0](const LinearState& x) {
      return LinearState{x.speed, a0, 0.0};
    });
  } catch (const std::domain_error&) {
    out.observation.assign(observation_dim(), 0.0);
    out.reward = kFailureReward;
    out.done = out.terminal = true;
    return out;
  }
  ++k_;
  t_ = k_ * cfg_.dt;
  leader_.acceleration = leader_accel(t_);

  out.observation = observation();
  if (cfg_.variant == Variant::Integral) {
    out.reward = reward_integral(out.observation[0], u_, cfg_.reward.kappa,
                                 cfg_.reward.beta);
  } else {
    const ErrorVector e = errors();
    out.reward = reward_conventional({&e, 1}, u_, cfg_.reward.gamma,
                                     cfg_.reward.beta);
  }
  out.done = k_ >= cfg_.steps;
  return out;
}

// ---------------------------------------------------------------------------

ErrorVector pair_error(const VehicleState& own, const VehicleState& neighbor,
                       double gap) {
  return {own.position - neighbor.position + gap, own.speed - neighbor.speed,
          own.acceleration - neighbor.acceleration};
}

double leader_step_profile(double t) {
  return (t > 5.0 && t <= 10.0) ? 1.0 : 0.0;
}

ConsensusController::ConsensusController(ConsensusGains gains, bool saturated,
                                         double u_min, double u_max)
    : gains_(gains), saturated_(saturated), u_min_(u_min), u_max_(u_max) {}

double ConsensusController::command(const FollowerView& view) const {
  std::vector<ConsensusNeighbor> ns;
  ns.reserve(view.neighbors.size());
  for (const auto& n : view.neighbors) {
    ns.push_back({to_linear(n.state), -n.gap});
  }
  const double u = consensus_control(to_linear(view.own), ns, gains_);
  return saturated_ ? saturate(u, u_min_, u_max_) : u;
}

DirectPolicyController::DirectPolicyController(std::shared_ptr<const Mlp> actor,
                                               double u_min, double u_max,
                                               Aggregate aggregate)
    : actor_(std::move(actor)), u_min_(u_min), u_max_(u_max),
      aggregate_(aggregate) {
  if (!actor_ || actor_->input_dim() != 3 || actor_->output_dim() != 1) {
    throw std::invalid_argument(
        "DirectPolicyController: actor must map 3 inputs to 1 output");
  }
}

double DirectPolicyController::command(const FollowerView& view) const {
  ErrorVector sum{0.0, 0.0, 0.0};
  for (const auto& n : view.neighbors) {
    const ErrorVector e = pair_error(view.own, n.state, n.gap);
    for (std::size_t k = 0; k < 3; ++k) sum[k] += e[k];
  }
  if (aggregate_ == Aggregate::Mean && !view.neighbors.empty()) {
    for (auto& x : sum) x /= static_cast<double>(view.neighbors.size());
  }
  const double raw = forward(*actor_, sum)[0];
  return scale_action(raw, u_min_, u_max_);
}

IntegralPolicyController::IntegralPolicyController(
    std::shared_ptr<const Mlp> actor, double du_min, double du_max,
    double u_min, double u_max)
    : actor_(std::move(actor)), du_min_(du_min), du_max_(du_max),
      u_min_(u_min), u_max_(u_max) {
  if (!actor_ || actor_->input_dim() != 1 || actor_->output_dim() != 1) {
    throw std::invalid_argument(
        "IntegralPolicyController: actor must map 1 input to 1 output");
  }
}

double IntegralPolicyController::command(const FollowerView& view) const {
  std::vector<NeighborOutput> ns;
  ns.reserve(view.neighbors.size());
  for (const auto& n : view.neighbors) ns.push_back({observe(n.state), n.gap});
  const double e = mean_error(observe(view.own), ns);
  const double raw = forward(*actor_, std::span<const double>(&e, 1))[0];
  const double du = scale_action(raw, du_min_, du_max_);
  return integrate_action(view.u_prev, du, view.dt, u_min_, u_max_);
}

// ---------------------------------------------------------------------------

PlatoonEnv::PlatoonEnv(PlatoonConfig cfg,
                       std::vector<std::shared_ptr<const Controller>> controllers,
                       Profile leader_profile)
    : cfg_(std::move(cfg)), controllers_(std::move(controllers)),
      profile_(leader_profile) {
  if (!validate_dag(cfg_.topology)) {
    throw std::invalid_argument("PlatoonEnv: topology is not a look-ahead DAG");
  }
  const auto n = static_cast<std::size_t>(cfg_.topology.n_followers);
  cfg_.nominal.validate();
  cfg_.externals.validate();
  if (cfg_.truth.empty()) cfg_.truth.assign(n + 1, cfg_.nominal);
  if (cfg_.truth.size() != n + 1) {
    throw std::invalid_argument(
        "PlatoonEnv: need one parameter set per vehicle (leader included)");
  }
  for (const auto& p : cfg_.truth) p.validate();
  if (controllers_.size() != n) {
    throw std::invalid_argument("PlatoonEnv: need one controller per follower");
  }
  for (const auto& c : controllers_) {
    if (!c) throw std::invalid_argument("PlatoonEnv: null controller");
  }
  if (!(cfg_.dt > 0.0) || !profile_) {
    throw std::invalid_argument("PlatoonEnv: need dt > 0 and a leader profile");
  }

  states_.resize(n + 1);
  u_.assign(n + 1, 0.0);
  for (std::size_t i = 0; i <= n; ++i) {
    VehicleState& s = states_[i];
    s.position = -static_cast<double>(i) * cfg_.topology.gap;
    s.speed = cfg_.cruise_speed;
    s.acceleration = 0.0;
    s.torque = i == 0 ? 0.0
                      : equilibrium_torque(cfg_.cruise_speed, cfg_.truth[i],
                                           cfg_.externals);
  }
  states_[0].acceleration = profile_(0.5 * cfg_.dt);
  u_[0] = states_[0].acceleration;
}

double PlatoonEnv::spacing_error(int id) const {
  if (id <= 0) return 0.0;
  const auto i = static_cast<std::size_t>(id);
  return states_[i].position - states_[i - 1].position + cfg_.topology.gap;
}

void PlatoonEnv::set_state(int id, const VehicleState& s) {
  states_.at(static_cast<std::size_t>(id)) = s;
}

std::vector<VehicleSample> PlatoonEnv::snapshot() const {
  std::vector<VehicleSample> out;
  out.reserve(states_.size());
  for (std::size_t i = 0; i < states_.size(); ++i) {
    const auto& s = states_[i];
    out.push_back({t_, static_cast<int>(i), s.position, s.speed, s.acceleration,
                   u_[i], spacing_error(static_cast<int>(i))});
  }
  return out;
}

FollowerView PlatoonEnv::view_of(int id) const {
  FollowerView v;
  v.id = id;
  v.own = states_[static_cast<std::size_t>(id)];
  v.u_prev = u_[static_cast<std::size_t>(id)];
  v.dt = cfg_.dt;
  for (int j : cfg_.topology.neighbors_of(id)) {
    v.neighbors.push_back({j, states_[static_cast<std::size_t>(j)],
                           desired_gap(id, j, cfg_.topology.gap)});
  }
  return v;
}

void platoon_step(PlatoonEnv& env) {
  const int n = env.n_followers();
  const double dt = env.cfg_.dt;
  std::vector<double> commands(static_cast<std::size_t>(n) + 1, 0.0);
  for (int i = 1; i <= n; ++i) {
    commands[static_cast<std::size_t>(i)] =
        env.controllers_[static_cast<std::size_t>(i - 1)]->command(env.view_of(i));
  }

  std::vector<VehicleState> next = env.states_;
  for (int i = 1; i <= n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      next[k] = step_vehicle(env.states_[k], commands[k], env.cfg_.nominal,
                             env.cfg_.truth[k], env.cfg_.externals, dt);
    } catch (const std::domain_error& e) {
      throw std::runtime_error("platoon_step: vehicle " + std::to_string(i) +
                               " diverged at t=" + std::to_string(env.t_) +
                               " (" + e.what() + ")");
    }
  }
  // Ideal leader: acceleration held over the step, exact double integration.
  VehicleState& lead = next[0];
  const double a0 = env.states_[0].acceleration;
  lead.position += env.states_[0].speed * dt + 0.5 * a0 * dt * dt;
  lead.speed += a0 * dt;

  env.states_ = std::move(next);
  for (int i = 1; i <= n; ++i) {
    env.u_[static_cast<std::size_t>(i)] = commands[static_cast<std::size_t>(i)];
  }
  ++env.steps_;
  env.t_ = static_cast<double>(env.steps_) * dt;
  env.states_[0].acceleration = env.profile_(env.t_ + 0.5 * dt);
  env.u_[0] = env.states_[0].acceleration;
}

}  // namespace platoon
