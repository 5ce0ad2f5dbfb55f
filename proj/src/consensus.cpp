#include "platoon/consensus.hpp"

#include <stdexcept>

namespace platoon {

namespace {

double gain_dot(const ConsensusGains& k, double p, double v, double a) {
  return k.k_p * p + k.k_v * v + k.k_a * a;
}

void require_neighbors(std::span<const ConsensusNeighbor> neighbors) {
  if (neighbors.empty()) {
    throw std::invalid_argument("consensus: neighbor list is empty");
  }
}

}  // namespace

double consensus_control(const LinearState& own,
                         std::span<const ConsensusNeighbor> neighbors,
                         const ConsensusGains& gains) {
  require_neighbors(neighbors);
  double u = 0.0;
  for (const auto& n : neighbors) {
    u -= gain_dot(gains, own.position - n.state.position - n.offset,
                  own.speed - n.state.speed,
                  own.acceleration - n.state.acceleration);
  }
  return u;
}

MeanFormTerms mean_form_decomposition(
    const LinearState& own, std::span<const ConsensusNeighbor> neighbors,
    const ConsensusGains& gains) {
  require_neighbors(neighbors);
  double avg = 0.0;
  for (const auto& n : neighbors) {
    avg += gain_dot(gains, n.state.position + n.offset, n.state.speed,
                    n.state.acceleration);
  }
  avg /= static_cast<double>(neighbors.size());
  const double mean_term =
      -gain_dot(gains, own.position, own.speed, own.acceleration) + avg;
  return {mean_term, consensus_control(own, neighbors, gains) - mean_term};
}

}  // namespace platoon
