// Linear distributed consensus law used as the comparison baseline.
#pragma once

#include <span>

#include "platoon/vehicle_dynamics.hpp"

namespace platoon {

struct ConsensusGains {
  double k_p = 1.0;
  double k_v = 2.0;
  double k_a = 1.0;
};

/// A predecessor as seen by the consensus law. `offset` is the desired value
/// of p_own - p_neighbor; a vehicle trailing its neighbor by a gap d uses
/// offset = -d.
struct ConsensusNeighbor {
  LinearState state;
  double offset = 0.0;
};

/// u = -sum_j K [p_i - p_j - offset_j, v_i - v_j, a_i - a_j]^T.
/// Throws std::invalid_argument on an empty neighbor list.
double consensus_control(const LinearState& own,
                         std::span<const ConsensusNeighbor> neighbors,
                         const ConsensusGains& gains);

struct MeanFormTerms {
  double mean_term = 0.0;
  double residue = 0.0;
};

/// Splits the consensus law into "own state versus the averaged neighbor"
/// plus a residue that vanishes for a single neighbor.
MeanFormTerms mean_form_decomposition(
    const LinearState& own, std::span<const ConsensusNeighbor> neighbors,
    const ConsensusGains& gains);

}  // namespace platoon
