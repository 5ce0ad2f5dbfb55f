#include "platoon/ddpg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "platoon/format.hpp"
#include "platoon/seeding.hpp"

namespace platoon {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) {
    throw std::invalid_argument("ReplayBuffer: capacity must be positive");
  }
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
    return;
  }
  items_[cursor_] = std::move(t);
  cursor_ = (cursor_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= items_.size()) throw std::out_of_range("ReplayBuffer::at");
  return items_[(cursor_ + i) % items_.size()];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(
    std::size_t n, std::mt19937_64& rng) const {
  if (items_.empty()) throw std::logic_error("ReplayBuffer: sample from empty");
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<std::size_t> out(n);
  for (auto& i : out) i = pick(rng);
  return out;
}

std::vector<Transition> ReplayBuffer::sample(std::size_t n,
                                             std::mt19937_64& rng) const {
  std::vector<Transition> out;
  out.reserve(n);
  for (std::size_t i : sample_indices(n, rng)) out.push_back(items_[i]);
  return out;
}

double ou_step(OuNoise& noise, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  noise.value += noise.theta * (noise.mean - noise.value) * noise.dt +
                 noise.sigma * std::sqrt(noise.dt) * normal(rng);
  return noise.value;
}

void DdpgHyper::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("DdpgHyper: gamma must lie in [0, 1]");
  }
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw std::invalid_argument("DdpgHyper: tau must lie in [0, 1]");
  }
  if (batch_size == 0 || buffer_capacity < batch_size) {
    throw std::invalid_argument(
        "DdpgHyper: need 0 < batch_size <= buffer_capacity");
  }
  if (!(actor_lr > 0.0) || !(critic_lr > 0.0) || !(dt > 0.0)) {
    throw std::invalid_argument("DdpgHyper: rates and dt must be positive");
  }
  if (ou_sigma < 0.0 || ou_theta < 0.0) {
    throw std::invalid_argument("DdpgHyper: OU parameters must be >= 0");
  }
  for (int h : hidden) {
    if (h < 1) throw std::invalid_argument("DdpgHyper: hidden sizes >= 1");
  }
}

Agent make_agent(std::size_t state_dim, std::size_t action_dim,
                 const DdpgHyper& hyper, std::uint64_t seed) {
  hyper.validate();
  if (state_dim == 0 || action_dim == 0) {
    throw std::invalid_argument("make_agent: dimensions must be positive");
  }
  std::vector<int> actor_dims{static_cast<int>(state_dim)};
  std::vector<int> critic_dims{static_cast<int>(state_dim + action_dim)};
  std::vector<Activation> acts;
  for (int h : hyper.hidden) {
    actor_dims.push_back(h);
    critic_dims.push_back(h);
    acts.push_back(Activation::Relu);
  }
  actor_dims.push_back(static_cast<int>(action_dim));
  critic_dims.push_back(1);
  std::vector<Activation> actor_acts = acts, critic_acts = acts;
  actor_acts.push_back(Activation::Tanh);
  critic_acts.push_back(Activation::Identity);

  Agent a;
  a.hyper = hyper;
  a.actor = init_mlp(actor_dims, actor_acts, derive_seed(seed, 1), 3e-3);
  a.critic = init_mlp(critic_dims, critic_acts, derive_seed(seed, 2));
  a.target_actor = a.actor;
  a.target_critic = a.critic;
  a.actor_opt = make_adam_state(a.actor, hyper.actor_lr);
  a.critic_opt = make_adam_state(a.critic, hyper.critic_lr);
  a.noise.assign(action_dim,
                 OuNoise{0.0, hyper.ou_sigma, hyper.ou_theta, hyper.dt, 0.0});
  a.buffer = ReplayBuffer(hyper.buffer_capacity);
  a.rng.seed(derive_seed(seed, 3));
  return a;
}

std::vector<double> select_action(Agent& agent, std::span<const double> state,
                                  bool explore) {
  std::vector<double> action = forward(agent.actor, state);
  if (explore) {
    for (std::size_t k = 0; k < action.size(); ++k) {
      action[k] = std::clamp(action[k] + ou_step(agent.noise[k], agent.rng),
                             -1.0, 1.0);
    }
  }
  return action;
}

void soft_update(Mlp& target, const Mlp& online, double tau) {
  if (target.layers.size() != online.layers.size()) {
    throw std::invalid_argument("soft_update: layer count mismatch");
  }
  for (std::size_t k = 0; k < target.layers.size(); ++k) {
    auto& t = target.layers[k];
    const auto& o = online.layers[k];
    if (t.weights.rows() != o.weights.rows() ||
        t.weights.cols() != o.weights.cols()) {
      throw std::invalid_argument("soft_update: layer shape mismatch");
    }
    t.weights = tau * o.weights + (1.0 - tau) * t.weights;
    t.bias = tau * o.bias + (1.0 - tau) * t.bias;
  }
}

double actor_update(Mlp& actor, AdamState& opt, const Eigen::MatrixXd& states,
                    const ActionGradient& dq_da) {
  ForwardCache cache;
  const Eigen::MatrixXd actions = forward(actor, states, &cache);
  double mean_q = 0.0;
  const Eigen::MatrixXd grad = dq_da(states, actions, mean_q);
  if (grad.rows() != actions.rows() || grad.cols() != actions.cols()) {
    throw std::invalid_argument("actor_update: action gradient shape mismatch");
  }
  // Ascend mean Q == descend -mean Q.
  const Eigen::MatrixXd upstream = -grad / static_cast<double>(states.cols());
  adam_step(actor, backward(actor, cache, upstream), opt);
  return mean_q;
}

namespace {

Eigen::MatrixXd stack(const Eigen::MatrixXd& top, const Eigen::MatrixXd& bottom) {
  Eigen::MatrixXd out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

}  // namespace

TrainStepStats train_step(Agent& agent, std::span<const Transition> batch) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  const auto n = static_cast<Eigen::Index>(batch.size());
  const auto sdim = static_cast<Eigen::Index>(batch[0].state.size());
  const auto adim = static_cast<Eigen::Index>(batch[0].action.size());

  Eigen::MatrixXd s(sdim, n), a(adim, n), s2(sdim, n);
  Eigen::RowVectorXd r(n), not_done(n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const auto& t = batch[static_cast<std::size_t>(c)];
    if (static_cast<Eigen::Index>(t.state.size()) != sdim ||
        static_cast<Eigen::Index>(t.next_state.size()) != sdim ||
        static_cast<Eigen::Index>(t.action.size()) != adim) {
      throw std::invalid_argument("train_step: ragged batch");
    }
    s.col(c) = Eigen::Map<const Eigen::VectorXd>(t.state.data(), sdim);
    s2.col(c) = Eigen::Map<const Eigen::VectorXd>(t.next_state.data(), sdim);
    a.col(c) = Eigen::Map<const Eigen::VectorXd>(t.action.data(), adim);
    r(c) = t.reward;
    not_done(c) = t.done ? 0.0 : 1.0;
  }

  const DdpgHyper& h = agent.hyper;
  const Eigen::MatrixXd next_q =
      forward(agent.target_critic, stack(s2, forward(agent.target_actor, s2)));
  const Eigen::RowVectorXd y =
      r + h.gamma * not_done.cwiseProduct(next_q.row(0));

  ForwardCache critic_cache;
  const Eigen::MatrixXd q = forward(agent.critic, stack(s, a), &critic_cache);
  const Eigen::RowVectorXd diff = q.row(0) - y;
  TrainStepStats stats;
  stats.critic_loss = diff.squaredNorm() / static_cast<double>(n);
  if (!std::isfinite(stats.critic_loss)) {
    std::ostringstream msg;
    msg << "train_step: non-finite critic loss (max |reward| "
        << r.cwiseAbs().maxCoeff() << ", max |target| "
        << y.cwiseAbs().maxCoeff() << ")";
    throw std::runtime_error(msg.str());
  }
  const Eigen::MatrixXd dloss = 2.0 * diff / static_cast<double>(n);
  adam_step(agent.critic, backward(agent.critic, critic_cache, dloss),
            agent.critic_opt);

  const Mlp& critic = agent.critic;
  stats.actor_objective = actor_update(
      agent.actor, agent.actor_opt, s,
      [&critic, sdim](const Eigen::MatrixXd& states,
                      const Eigen::MatrixXd& actions, double& mean_q) {
        ForwardCache cache;
        const Eigen::MatrixXd qa = forward(critic, stack(states, actions), &cache);
        mean_q = qa.mean();
        const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(1, qa.cols());
        const Gradients g = backward(critic, cache, ones, false);
        return Eigen::MatrixXd(g.input.bottomRows(g.input.rows() - sdim));
      });
  if (!std::isfinite(stats.actor_objective)) {
    throw std::runtime_error("train_step: non-finite actor objective");
  }

  soft_update(agent.target_critic, agent.critic, h.tau);
  soft_update(agent.target_actor, agent.actor, h.tau);
  return stats;
}

TrainingResult run_training(Environment& env, Agent& agent, int episodes,
                            std::uint64_t seed,
                            const EpisodeCallback& on_episode) {
  if (static_cast<Eigen::Index>(env.observation_dim()) != agent.actor.input_dim() ||
      static_cast<Eigen::Index>(env.action_dim()) != agent.actor.output_dim()) {
    throw std::invalid_argument(
        "run_training: environment and agent dimensions differ");
  }
  TrainingResult result;
  const std::size_t batch_size = agent.hyper.batch_size;
  for (int ep = 0; ep < episodes; ++ep) {
    std::vector<double> obs =
        env.reset(derive_seed(seed, static_cast<std::uint64_t>(ep)));
    for (auto& n : agent.noise) n.reset();
    double total = 0.0;
    try {
      for (;;) {
        std::vector<double> action = select_action(agent, obs, true);
        StepResult step = env.step(action);
        total += step.reward;
        agent.buffer.push(
            {obs, std::move(action), step.reward, step.observation, step.terminal});
        obs = std::move(step.observation);
        if (agent.buffer.size() >= batch_size) {
          const auto batch = agent.buffer.sample(batch_size, agent.rng);
          train_step(agent, batch);
        }
        if (step.done) break;
      }
    } catch (const std::exception& e) {
      result.diverged = true;
      result.message = "episode " + std::to_string(ep) + ": " + e.what();
      return result;
    }
    result.episode_rewards.push_back(total);
    if (on_episode) on_episode(ep, total);
  }
  return result;
}

std::vector<double> moving_average(std::span<const double> xs,
                                   std::size_t window) {
  if (window == 0) throw std::invalid_argument("moving_average: window 0");
  std::vector<double> out;
  out.reserve(xs.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sum += xs[i];
    if (i >= window) sum -= xs[i - window];
    out.push_back(sum / static_cast<double>(std::min(i + 1, window)));
  }
  return out;
}

void write_reward_trace(const std::filesystem::path& path,
                        std::span<const double> episode_rewards) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  const auto avg = moving_average(episode_rewards, 10);
  os << "episode,reward_sum,reward_moving_avg\n";
  for (std::size_t i = 0; i < episode_rewards.size(); ++i) {
    os << i << ',' << format_number(episode_rewards[i]) << ','
       << format_number(avg[i]) << '\n';
  }
}

std::vector<double> read_reward_trace(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(is, line);
  if (line != "episode,reward_sum,reward_moving_avg") {
    throw std::runtime_error("unexpected reward trace header in " + path.string());
  }
  std::vector<double> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto a = line.find(',');
    const auto b = line.find(',', a + 1);
    if (a == std::string::npos || b == std::string::npos) {
      throw std::runtime_error("malformed reward trace row: " + line);
    }
    out.push_back(std::stod(line.substr(a + 1, b - a - 1)));
  }
  return out;
}

}  // namespace platoon
