// Look-ahead communication graphs for a platoon of one leader (index 0) and
// n followers (indices 1..n).
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace platoon {

enum class TopologyKind { PF, PFL, TPF, TPFL };

std::string_view to_string(TopologyKind kind);
/// Accepts the lower-case CLI spellings pf | pfl | tpf | tpfl.
std::optional<TopologyKind> parse_topology_kind(std::string_view name);

struct Topology {
  TopologyKind kind = TopologyKind::PF;
  int n_followers = 0;
  /// neighbors[i - 1] is the ascending predecessor set of follower i.
  std::vector<std::vector<int>> neighbors;
  double gap = 5.0;

  const std::vector<int>& neighbors_of(int follower) const {
    return neighbors.at(static_cast<std::size_t>(follower - 1));
  }
};

Topology make_topology(TopologyKind kind, int n_followers, double gap);

/// Desired spacing between vehicle i and a predecessor j < i: (i - j) * gap.
double desired_gap(int i, int j, double gap);

/// True iff every neighbor set is non-empty and only references vehicles
/// strictly ahead.
bool validate_dag(const Topology& t);

}  // namespace platoon
