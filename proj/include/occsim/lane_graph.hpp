#pragma once

#include <optional>
#include <span>
#include <vector>

#include "occsim/lanes.hpp"

namespace occsim {

/// Routing graph over lane samples: consecutive samples are joined, and each
/// lane end is linked to the nearest sample of every other lane within
/// `link_radius`.
class LaneGraph {
 public:
  struct Edge {
    int to;
    double w;
  };

  LaneGraph() = default;
  LaneGraph(const std::vector<Lane>& lanes, double link_radius);

  /// Empty graph for hand-built fixtures.
  int add_node(const Vec2& p, int lane = -1, int sample = -1);
  void add_edge(int u, int v);

  std::size_t size() const { return pos_.size(); }
  const Vec2& position(int u) const { return pos_[static_cast<std::size_t>(u)]; }
  const std::vector<Edge>& edges(int u) const { return adj_[static_cast<std::size_t>(u)]; }
  int lane_of(int u) const { return lane_[static_cast<std::size_t>(u)]; }
  int sample_of(int u) const { return sample_[static_cast<std::size_t>(u)]; }

  /// Nearest node within max_dist, lowest id on ties.
  std::optional<int> nearest(const Vec2& p, double max_dist) const;
  /// Nearest node of a given lane.
  std::optional<int> nearest_on_lane(const Vec2& p, int lane) const;

  std::vector<Vec2> polyline(std::span<const int> path) const;
  double path_weight(std::span<const int> path) const;

 private:
  std::vector<Vec2> pos_;
  std::vector<int> lane_;
  std::vector<int> sample_;
  std::vector<std::vector<Edge>> adj_;
};

/// A* with the straight-line heuristic. Returns the node path or nullopt.
std::optional<std::vector<int>> astar(const LaneGraph& g, int start, int goal);

}  // namespace occsim
