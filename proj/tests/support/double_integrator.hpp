// Small regulation task for exercising the learner: a unit-mass point on a
// line, observation [x, v], action = acceleration in [-1, 1].
#pragma once

#include <random>

#include "platoon/environments.hpp"
#include "platoon/rl_env.hpp"
#include "platoon/vehicle_dynamics.hpp"

namespace platoon::testing {

class DoubleIntegratorEnv final : public Environment {
 public:
  double dt = 0.1;
  int steps = 200;
  double range = 0.5;

  std::size_t observation_dim() const override { return 2; }
  std::size_t action_dim() const override { return 1; }

  std::vector<double> reset(std::uint64_t seed) override {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-range, range);
    x_ = u(rng);
    v_ = u(rng);
    k_ = 0;
    return {x_, v_};
  }

  void set_state(double x, double v) {
    x_ = x;
    v_ = v;
    k_ = 0;
  }

  StepResult step(std::span<const double> action) override {
    const double a = saturate(action[0], -1.0, 1.0);
    x_ += v_ * dt + 0.5 * a * dt * dt;
    v_ += a * dt;
    ++k_;
    StepResult r;
    r.observation = {x_, v_};
    r.reward = reward_integral(x_, a, 1.0, 0.2);
    r.done = k_ >= steps;
    return r;
  }

 private:
  double x_ = 0.0, v_ = 0.0;
  int k_ = 0;
};

}  // namespace platoon::testing
