#pragma once

#include <map>
#include <vector>

#include "occsim/geometry.hpp"
#include "occsim/occupancy.hpp"

namespace occsim {

struct TopologyParams {
  double w_lane = 3.6;        ///< metres
  double tau_prune = 5.0;     ///< spurs shorter than this (metres) are removed
  int tau_obs = 20;           ///< obstacle voxels tolerated in the semantic probe
  double probe_length = 15.0; ///< semantic probe box, metres along the exit direction
  double probe_width = 3.6;   ///< semantic probe box, metres across

  void validate() const;
};

/// Undirected weighted graph on skeleton pixels. Node positions are in cell
/// units of `geometry` (integer = cell centre); super-nodes may be fractional.
class RoadGraph {
 public:
  RoadGraph() = default;
  explicit RoadGraph(GridGeometry geometry) : geometry_(geometry) {}

  int add_node(const Vec2& pixel);
  void add_edge(int u, int v, double w);
  void add_edge(int u, int v) { add_edge(u, v, (pos_[u] - pos_[v]).norm()); }
  void remove_edge(int u, int v);
  void remove_node(int u);

  bool alive(int u) const { return alive_[static_cast<std::size_t>(u)]; }
  int degree(int u) const { return static_cast<int>(adj_[static_cast<std::size_t>(u)].size()); }
  const std::map<int, double>& neighbors(int u) const { return adj_[static_cast<std::size_t>(u)]; }
  bool has_edge(int u, int v) const { return adj_[static_cast<std::size_t>(u)].count(v) != 0; }
  double weight(int u, int v) const { return adj_[static_cast<std::size_t>(u)].at(v); }
  const Vec2& pixel(int u) const { return pos_[static_cast<std::size_t>(u)]; }
  void set_pixel(int u, const Vec2& p) { pos_[static_cast<std::size_t>(u)] = p; }
  Vec2 world(int u) const;
  Vec2 pixel_to_world(const Vec2& p) const;

  /// Capacity of the id space (includes removed nodes).
  int id_bound() const { return static_cast<int>(pos_.size()); }
  std::vector<int> nodes() const;
  std::size_t node_count() const;
  std::size_t edge_count() const;
  std::vector<int> nodes_with_degree(int deg) const;
  std::vector<int> junctions() const;

  const GridGeometry& geometry() const { return geometry_; }
  void set_geometry(const GridGeometry& g) { geometry_ = g; }

  std::vector<int> valid_endpoints;

 private:
  GridGeometry geometry_;
  std::vector<Vec2> pos_;
  std::vector<char> alive_;
  std::vector<std::map<int, double>> adj_;
};

/// Road cells of the ground layer.
Mask2D road_mask(const GlobalMap& map);

/// Zhang-Suen thinning followed by the 2x2 block clearing pass. Out-of-image
/// neighbours replicate the nearest border pixel, so roads leaving the map
/// keep their skeleton up to the border.
Mask2D skeletonize(const Mask2D& mask);
Mask2D zhang_suen(const Mask2D& mask);
/// Clears (x+1, y+1) of every fully set 2x2 block, scanning in index order.
void clear_square_blocks(Mask2D& skeleton);

/// One node per skeleton pixel, 8-neighbour edges weighted by Euclidean
/// distance, then the longest edge of every triangle removed.
RoadGraph build_graph(const Mask2D& skeleton, const GridGeometry& geometry = {});

/// Removes the longest edge of each 3-clique until the graph is triangle-free.
void break_triangles(RoadGraph& g);

/// Spur pruning and junction contraction, iterated to a joint fixpoint.
RoadGraph clean_graph(RoadGraph g, const TopologyParams& params);

/// Dual-probe endpoint filter; also stores the result in g.valid_endpoints.
std::vector<int> filter_endpoints(RoadGraph& g, const GlobalMap& map, const TopologyParams& params);

/// Full extraction: mask, skeleton, graph, cleaning and endpoint filtering.
RoadGraph extract_topology(const GlobalMap& map, const TopologyParams& params = {});

/// Node chains between nodes of degree != 2 (each listed once, ordered along
/// the chain). Cycles without such nodes start at their lowest id.
std::vector<std::vector<int>> extract_segments(const RoadGraph& g);

}  // namespace occsim
