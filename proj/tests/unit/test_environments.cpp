#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>

#include "platoon/environments.hpp"
#include "support/ks.hpp"

using namespace platoon;
using doctest::Approx;

namespace {

std::vector<std::shared_ptr<const Controller>> consensus_for(int n) {
  const VehicleParams p;
  return std::vector<std::shared_ptr<const Controller>>(
      static_cast<std::size_t>(n),
      std::make_shared<ConsensusController>(ConsensusGains{}, true, p.u_min, p.u_max));
}

double no_leader_input(double) { return 0.0; }

/// Scalar actor computing raw = clamp(gain * x).
std::shared_ptr<const Mlp> linear_actor(int inputs, double gain) {
  auto net = std::make_shared<Mlp>();
  net->layers.push_back({Eigen::MatrixXd::Constant(1, inputs, gain),
                         Eigen::VectorXd::Zero(1), Activation::Identity});
  return net;
}

}  // namespace

TEST_CASE("mean error over neighbors") {
  const std::vector<NeighborOutput> two{{7, 5}, {3, 10}};
  CHECK(mean_error(10, two) == Approx(12.5));
  const NeighborOutput one{8, 5};
  CHECK(mean_error(3, {&one, 1}) == 0.0);
  const std::vector<NeighborOutput> dup{{8, 5}, {8, 5}};
  CHECK(mean_error(4, dup) == mean_error(4, {&one, 1}));
  CHECK_THROWS_AS(mean_error(0, {}), std::invalid_argument);
}

TEST_CASE("conventional reward") {
  const ErrorVector g{1, 1, 1};
  const ErrorVector zero{0, 0, 0};
  const ErrorVector ep{1, 0, 0};
  CHECK(reward_conventional({&zero, 1}, 0.0, g, 0.2) == 1.0);
  CHECK(reward_conventional({&ep, 1}, 0.0, g, 0.2) == Approx(0.3679).epsilon(1e-4));
  CHECK(reward_conventional({&zero, 1}, 1.0, g, 0.2) == Approx(0.8187).epsilon(1e-4));
  const std::vector<ErrorVector> pair{ep, {0, 1, 0}};
  CHECK(reward_conventional(pair, 0.0, g, 0.2) == Approx(std::exp(-2.0)));
}

TEST_CASE("integral reward") {
  CHECK(reward_integral(0, 0, 1.0, 0.2) == 1.0);
  CHECK(reward_integral(1, 0, 1.0, 0.2) == Approx(std::exp(-1.0)));
  CHECK(reward_integral(0, 3, 1.0, 0.2) == Approx(0.1653).epsilon(1e-3));
}

TEST_CASE("rewards lie in (0, 1] and reach 1 only at zero") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-3, 3);
  const ErrorVector g{1, 1, 1};
  for (int k = 0; k < 10000; ++k) {
    const ErrorVector e{u(rng), u(rng), u(rng)};
    const double rc = reward_conventional({&e, 1}, u(rng), g, 0.2);
    const double ri = reward_integral(u(rng), u(rng), 1.0, 0.2);
    REQUIRE(rc > 0.0);
    REQUIRE(rc < 1.0);
    REQUIRE(ri > 0.0);
    REQUIRE(ri < 1.0);
  }
}

TEST_CASE("saturation and the integral-action wrapper") {
  CHECK(saturate(5, -3, 3) == 3);
  CHECK(saturate(-4, -3, 3) == -3);
  CHECK(saturate(0.5, -3, 3) == 0.5);
  CHECK(integrate_action(1.2, 0.0, 0.05, -3, 3) == 1.2);
  CHECK(integrate_action(2.9, 30.0, 0.05, -3, 3) == 3.0);
  CHECK(integrate_action(0.0, -30.0, 0.05, -3, 3) == Approx(-1.5));
  // Anti-windup: pinned at a bound and pushed further, it stays at the bound.
  double u = 3.0;
  for (int k = 0; k < 100; ++k) {
    u = integrate_action(u, 30.0, 0.05, -3, 3);
    REQUIRE(u == 3.0);
  }
  u = integrate_action(u, -10.0, 0.05, -3, 3);
  CHECK(u == Approx(2.5));
  CHECK(scale_action(-1, -30, 30) == -30);
  CHECK(scale_action(0, -3, 3) == 0);
  CHECK(scale_action(0.5, -3, 3) == 1.5);
}

TEST_CASE("variant names") {
  CHECK(parse_variant("ddpg") == Variant::Conventional);
  CHECK(parse_variant("ddpg-integral") == Variant::Integral);
  CHECK_FALSE(parse_variant("sac").has_value());
}

TEST_CASE("pseudorandom binary leader signal") {
  Prbs prbs(1.0, 2.5, 17);
  double prev = prbs.value(0.0);
  int switches = 0;
  for (int k = 1; k <= 4000; ++k) {
    const double t = k * 0.05;
    const double v = prbs.value(t);
    REQUIRE(std::abs(v) == 1.0);
    if (v != prev) {
      ++switches;
      const double ratio = t / 2.5;
      REQUIRE(std::abs(ratio - std::round(ratio)) < 1e-9);
    }
    prev = v;
  }
  CHECK(switches > 10);
  Prbs again(1.0, 2.5, 17);
  CHECK(again.value(37.0) == Prbs(1.0, 2.5, 17).value(37.0));
}

TEST_CASE("training environment reset") {
  TrainingEnvConfig cfg;
  TrainingEnv env(cfg);
  SUBCASE("same seed, same start") {
    const auto a = env.reset(9);
    const auto b = env.reset(9);
    CHECK(a == b);
    CHECK(env.applied_u() == 0.0);
    CHECK(env.follower().acceleration == env.leader().acceleration);
  }
  SUBCASE("collapsed ranges start on target") {
    cfg.spacing_range = 0.0;
    cfg.speed_range = 0.0;
    TrainingEnv z(cfg);
    CHECK(z.reset(3)[0] == Approx(0.0).scale(1.0));
    cfg.variant = Variant::Conventional;
    TrainingEnv c(cfg);
    const auto obs = c.reset(3);
    REQUIRE(obs.size() == 3);
    CHECK(obs[0] == 0.0);
    CHECK(obs[1] == 0.0);
    CHECK(obs[2] == 0.0);
  }
  SUBCASE("initial spacing errors are uniform on (-5, 5)") {
    cfg.variant = Variant::Conventional;
    TrainingEnv c(cfg);
    std::vector<double> spacing, speed;
    for (std::uint64_t s = 0; s < 1000; ++s) {
      const auto obs = c.reset(s);
      spacing.push_back(obs[0]);
      speed.push_back(obs[1]);
    }
    CHECK(testing::ks_uniform_statistic(spacing, -5, 5) < testing::ks_critical_001(1000));
    CHECK(testing::ks_uniform_statistic(speed, -2, 2) < testing::ks_critical_001(1000));
  }
}

TEST_CASE("training environment step") {
  TrainingEnvConfig cfg;
  SUBCASE("zero increment keeps the command") {
    TrainingEnv env(cfg);
    env.reset(1);
    env.set_state(env.leader(), env.follower(), 1.25);
    env.step(std::vector<double>{0.0});
    CHECK(env.applied_u() == 1.25);
  }
  SUBCASE("perfect tracking with a silent leader earns full reward") {
    cfg.prbs_amplitude = 0.0;
    for (Variant v : {Variant::Integral, Variant::Conventional}) {
      cfg.variant = v;
      TrainingEnv env(cfg);
      env.reset(1);
      env.set_state({0, 0, 0}, {-5, 0, 0}, 0.0);
      // Direct mode maps raw 0 to u = 0 as well.
      const StepResult r = env.step(std::vector<double>{0.0});
      CHECK(r.reward == 1.0);
      CHECK(env.follower().position == -5.0);
      CHECK(env.follower().speed == 0.0);
      CHECK_FALSE(r.done);
    }
  }
  SUBCASE("one step of full command follows the lag") {
    cfg.variant = Variant::Conventional;
    TrainingEnv env(cfg);
    env.reset(1);
    env.set_state({0, 0, 0}, {-5, 0, 0}, 0.0);
    env.step(std::vector<double>{1.0});
    const double z = 0.05 / 0.3;
    CHECK(env.applied_u() == 3.0);
    CHECK(env.follower().acceleration ==
          Approx(3.0 * (z - z * z / 2 + z * z * z / 6 - z * z * z * z / 24)).epsilon(1e-12));
  }
  SUBCASE("episodes end after the configured number of steps") {
    cfg.steps = 25;
    TrainingEnv env(cfg);
    env.reset(2);
    for (int k = 1; k <= 25; ++k) {
      const StepResult r = env.step(std::vector<double>{0.0});
      REQUIRE(r.done == (k == 25));
      REQUIRE_FALSE(r.terminal);
    }
  }
  SUBCASE("applied command always stays within bounds") {
    TrainingEnv env(cfg);
    env.reset(5);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> raw(-1, 1);
    for (int k = 0; k < 1000; ++k) {
      env.step(std::vector<double>{raw(rng)});
      REQUIRE(std::abs(env.applied_u()) <= 3.0);
    }
  }
}

TEST_CASE("single-neighbor mean error equals the pairwise output error") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int k = 0; k < 100; ++k) {
    const VehicleState own{u(rng), u(rng), u(rng), 0}, ahead{u(rng), u(rng), u(rng), 0};
    const NeighborOutput n{observe(ahead), 5.0};
    const ErrorVector e = pair_error(own, ahead, 5.0);
    REQUIRE(mean_error(observe(own), {&n, 1}) == Approx(e[0] + e[1] + e[2]));
  }
}

TEST_CASE("leader step profile") {
  CHECK(leader_step_profile(3.0) == 0.0);
  CHECK(leader_step_profile(7.0) == 1.0);
  CHECK(leader_step_profile(5.0) == 0.0);
  CHECK(leader_step_profile(10.0) == 1.0);
  CHECK(leader_step_profile(10.01) == 0.0);
}

TEST_CASE("platoon at equilibrium stays there") {
  PlatoonConfig cfg;
  cfg.topology = make_topology(TopologyKind::TPFL, 5, 5.0);
  PlatoonEnv env(cfg, consensus_for(5), &no_leader_input);
  for (int k = 0; k < 1000; ++k) platoon_step(env);
  for (int i = 1; i <= 5; ++i) {
    CHECK(std::abs(env.spacing_error(i)) < 1e-9);
    CHECK(env.state(i).speed == Approx(20.0));
  }
  CHECK(env.time() == 50.0);
}

TEST_CASE("consensus platoon settles after the leader step") {
  PlatoonConfig cfg;
  cfg.topology = make_topology(TopologyKind::PF, 9, 5.0);
  PlatoonEnv env(cfg, consensus_for(9));
  for (int k = 0; k < 1000; ++k) platoon_step(env);
  CHECK(env.state(0).speed == Approx(25.0).epsilon(1e-12));
  for (int i = 1; i <= 9; ++i) CHECK(std::abs(env.spacing_error(i)) < 0.05);
}

TEST_CASE("learned controllers see the errors they were trained on") {
  VehicleState own{-6, 20, 0, 0}, ahead{0, 20, 0, 0};
  FollowerView view;
  view.own = own;
  view.neighbors.push_back({0, ahead, 5.0});
  view.u_prev = 0.5;
  view.dt = 0.05;
  // Identity actor on the spacing error, then scaled to the bounds.
  const DirectPolicyController direct(linear_actor(3, -0.1), -3, 3);
  CHECK(direct.command(view) == Approx(0.3));
  const IntegralPolicyController integral(linear_actor(1, -0.1), -30, 30, -3, 3);
  CHECK(integral.command(view) == Approx(0.5 + 3.0 * 0.05));
  CHECK_THROWS_AS(DirectPolicyController(linear_actor(1, 1.0), -3, 3), std::invalid_argument);
  CHECK_THROWS_AS(IntegralPolicyController(linear_actor(3, 1.0), -30, 30, -3, 3),
                  std::invalid_argument);
}

TEST_CASE("platoon construction checks") {
  PlatoonConfig cfg;
  cfg.topology = make_topology(TopologyKind::PF, 3, 5.0);
  CHECK_THROWS_AS(PlatoonEnv(cfg, consensus_for(2)), std::invalid_argument);
  cfg.truth.assign(2, VehicleParams{});
  CHECK_THROWS_AS(PlatoonEnv(cfg, consensus_for(3)), std::invalid_argument);
  cfg.truth.clear();
  cfg.topology.neighbors[2] = {3};
  CHECK_THROWS_AS(PlatoonEnv(cfg, consensus_for(3)), std::invalid_argument);
}

TEST_CASE("platoon divergence is reported with the vehicle") {
  PlatoonConfig cfg;
  cfg.topology = make_topology(TopologyKind::PF, 2, 5.0);
  PlatoonEnv env(cfg, consensus_for(2));
  VehicleState bad = env.state(2);
  bad.torque = NAN;
  env.set_state(2, bad);
  CHECK_THROWS_AS(platoon_step(env), std::runtime_error);
}
