#include "platoon/topology.hpp"

#include <algorithm>
#include <stdexcept>

namespace platoon {

std::string_view to_string(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::PF: return "pf";
    case TopologyKind::PFL: return "pfl";
    case TopologyKind::TPF: return "tpf";
    case TopologyKind::TPFL: return "tpfl";
  }
  return "?";
}

std::optional<TopologyKind> parse_topology_kind(std::string_view name) {
  if (name == "pf") return TopologyKind::PF;
  if (name == "pfl") return TopologyKind::PFL;
  if (name == "tpf") return TopologyKind::TPF;
  if (name == "tpfl") return TopologyKind::TPFL;
  return std::nullopt;
}

Topology make_topology(TopologyKind kind, int n_followers, double gap) {
  if (n_followers < 1) {
    throw std::invalid_argument("make_topology: need at least one follower");
  }
  if (!(gap > 0.0)) {
    throw std::invalid_argument("make_topology: gap must be positive");
  }
  const bool two_ahead = kind == TopologyKind::TPF || kind == TopologyKind::TPFL;
  const bool leader = kind == TopologyKind::PFL || kind == TopologyKind::TPFL;

  Topology t{kind, n_followers, {}, gap};
  t.neighbors.reserve(static_cast<std::size_t>(n_followers));
  for (int i = 1; i <= n_followers; ++i) {
    std::vector<int> set{i - 1};
    if (two_ahead && i >= 2) set.push_back(i - 2);
    if (leader) set.push_back(0);
    std::sort(set.begin(), set.end());
    set.erase(std::unique(set.begin(), set.end()), set.end());
    t.neighbors.push_back(std::move(set));
  }
  return t;
}

double desired_gap(int i, int j, double gap) {
  if (j >= i) {
    throw std::invalid_argument("desired_gap: predecessor index must be ahead");
  }
  return static_cast<double>(i - j) * gap;
}

bool validate_dag(const Topology& t) {
  if (t.n_followers < 1 ||
      t.neighbors.size() != static_cast<std::size_t>(t.n_followers)) {
    return false;
  }
  for (int i = 1; i <= t.n_followers; ++i) {
    const auto& set = t.neighbors_of(i);
    if (set.empty()) return false;
    for (int j : set) {
      if (j < 0 || j >= i) return false;
    }
  }
  return true;
}

}  // namespace platoon
