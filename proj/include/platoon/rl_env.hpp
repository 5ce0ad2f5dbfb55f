// Minimal episodic environment interface consumed by the DDPG trainer.
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace platoon {

struct StepResult {
  std::vector<double> observation;
  double reward = 0.0;
  /// Episode is over (time limit or failure).
  bool done = false;
  /// Episode ended in a true terminal state; bootstrapping stops here. A
  /// plain time-limit ending keeps this false.
  bool terminal = false;
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::size_t observation_dim() const = 0;
  virtual std::size_t action_dim() const = 0;
  virtual std::vector<double> reset(std::uint64_t seed) = 0;
  /// Actions are expected in [-1, 1] per component.
  virtual StepResult step(std::span<const double> action) = 0;
};

}  // namespace platoon
