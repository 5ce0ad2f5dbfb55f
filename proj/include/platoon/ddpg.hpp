// Deep deterministic policy gradient: replay memory, Ornstein-Uhlenbeck
// exploration, target networks with soft updates, and the training loop.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "platoon/mlp.hpp"
#include "platoon/rl_env.hpp"

namespace platoon {

struct Transition {
  std::vector<double> state;
  std::vector<double> action;
  double reward = 0.0;
  std::vector<double> next_state;
  /// True terminal: the TD target does not bootstrap past it.
  bool done = false;
};

/// Fixed-capacity ring; once full, each push evicts the oldest transition.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  /// Index 0 is the oldest stored transition.
  const Transition& at(std::size_t i) const;
  /// Uniform indices with replacement into [0, size()).
  std::vector<std::size_t> sample_indices(std::size_t n,
                                          std::mt19937_64& rng) const;
  std::vector<Transition> sample(std::size_t n, std::mt19937_64& rng) const;

 private:
  std::size_t capacity_;
  std::vector<Transition> items_;
  std::size_t cursor_ = 0;  // slot that the next push overwrites once full
};

struct OuNoise {
  double mean = 0.0;
  double sigma = 0.15;
  double theta = 0.15;
  double dt = 0.05;
  double value = 0.0;

  void reset() { value = 0.0; }
};

/// x <- x + theta (mean - x) dt + sigma sqrt(dt) N(0, 1); returns the new x.
double ou_step(OuNoise& noise, std::mt19937_64& rng);

struct DdpgHyper {
  double gamma = 0.99;
  double tau = 0.005;
  double actor_lr = 1e-4;
  double critic_lr = 1e-4;
  std::size_t batch_size = 64;
  std::size_t buffer_capacity = 100000;
  std::vector<int> hidden{256, 256};
  double ou_sigma = 0.15;
  double ou_theta = 0.15;
  double dt = 0.05;

  void validate() const;
};

struct Agent {
  Mlp actor, critic, target_actor, target_critic;
  AdamState actor_opt, critic_opt;
  std::vector<OuNoise> noise;  // one process per action component
  ReplayBuffer buffer{1};
  DdpgHyper hyper;
  std::mt19937_64 rng;
};

/// Actor: state -> hidden relu layers -> tanh; critic: [state; action] ->
/// hidden relu layers -> identity. The actor's last layer starts within
/// +-3e-3 so early actions sit near zero.
Agent make_agent(std::size_t state_dim, std::size_t action_dim,
                 const DdpgHyper& hyper, std::uint64_t seed);

/// Deterministic actor output, or clip(actor + OU sample, -1, 1) when
/// exploring. Exploring advances the noise processes.
std::vector<double> select_action(Agent& agent, std::span<const double> state,
                                  bool explore);

/// target <- tau * online + (1 - tau) * target, elementwise.
void soft_update(Mlp& target, const Mlp& online, double tau);

/// dQ/da for a batch (action_dim x batch), writing the batch-mean Q into
/// `mean_q`.
using ActionGradient = std::function<Eigen::MatrixXd(
    const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions,
    double& mean_q)>;

/// One ascent step on mean Q(s, actor(s)) with the action gradient supplied
/// by `dq_da`. Returns the mean Q before the step.
double actor_update(Mlp& actor, AdamState& opt, const Eigen::MatrixXd& states,
                    const ActionGradient& dq_da);

struct TrainStepStats {
  double critic_loss = 0.0;
  double actor_objective = 0.0;
};

/// Critic regression onto r + gamma (1 - done) Q'(s', actor'(s')), actor
/// ascent through the critic's action gradient, then soft target updates.
/// Throws std::runtime_error when the loss turns non-finite.
TrainStepStats train_step(Agent& agent, std::span<const Transition> batch);

struct TrainingResult {
  std::vector<double> episode_rewards;  // undiscounted sum per episode
  bool diverged = false;
  std::string message;
};

using EpisodeCallback = std::function<void(int episode, double reward_sum)>;

/// Standard loop: reset, roll out with exploration, store every transition,
/// and take one train_step per environment step once the buffer holds a
/// batch. Per-episode reset seeds are derived from `seed`.
TrainingResult run_training(Environment& env, Agent& agent, int episodes,
                            std::uint64_t seed,
                            const EpisodeCallback& on_episode = {});

/// Trailing mean over at most `window` previous values (inclusive).
std::vector<double> moving_average(std::span<const double> xs,
                                   std::size_t window);

/// CSV: episode,reward_sum,reward_moving_avg (window 10).
void write_reward_trace(const std::filesystem::path& path,
                        std::span<const double> episode_rewards);
std::vector<double> read_reward_trace(const std::filesystem::path& path);

}  // namespace platoon
