#include "occsim/lane_graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace occsim {

LaneGraph::LaneGraph(const std::vector<Lane>& lanes, double link_radius) {
  std::vector<std::vector<int>> ids(lanes.size());
  for (std::size_t l = 0; l < lanes.size(); ++l) {
    for (std::size_t k = 0; k < lanes[l].points.size(); ++k) {
      ids[l].push_back(add_node(lanes[l].points[k], static_cast<int>(l), static_cast<int>(k)));
      if (k > 0) add_edge(ids[l][k - 1], ids[l][k]);
    }
  }
  for (std::size_t l = 0; l < lanes.size(); ++l) {
    if (ids[l].empty()) continue;
    for (int end : {ids[l].front(), ids[l].back()}) {
      for (std::size_t o = 0; o < lanes.size(); ++o) {
        if (o == l) continue;
        int best = -1;
        double best_d = link_radius;
        for (int v : ids[o]) {
          const double d = (position(v) - position(end)).norm();
          if (d <= best_d && (best < 0 || d < best_d)) {
            best = v;
            best_d = d;
          }
        }
        if (best >= 0) add_edge(end, best);
      }
    }
  }
}

int LaneGraph::add_node(const Vec2& p, int lane, int sample) {
  pos_.push_back(p);
  lane_.push_back(lane);
  sample_.push_back(sample);
  adj_.emplace_back();
  return static_cast<int>(pos_.size()) - 1;
}

void LaneGraph::add_edge(int u, int v) {
  if (u == v) return;
  for (const Edge& e : adj_[static_cast<std::size_t>(u)])
    if (e.to == v) return;
  const double w = (position(u) - position(v)).norm();
  adj_[static_cast<std::size_t>(u)].push_back({v, w});
  adj_[static_cast<std::size_t>(v)].push_back({u, w});
}

std::optional<int> LaneGraph::nearest(const Vec2& p, double max_dist) const {
  std::optional<int> best;
  double best_d = max_dist;
  for (std::size_t u = 0; u < pos_.size(); ++u) {
    const double d = (pos_[u] - p).norm();
    if (d < best_d || (!best && d <= best_d)) {
      best = static_cast<int>(u);
      best_d = d;
    }
  }
  return best;
}

std::optional<int> LaneGraph::nearest_on_lane(const Vec2& p, int lane) const {
  std::optional<int> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t u = 0; u < pos_.size(); ++u) {
    if (lane_[u] != lane) continue;
    const double d = (pos_[u] - p).norm();
    if (d < best_d) {
      best = static_cast<int>(u);
      best_d = d;
    }
  }
  return best;
}

std::vector<Vec2> LaneGraph::polyline(std::span<const int> path) const {
  std::vector<Vec2> out;
  out.reserve(path.size());
  for (int u : path) out.push_back(position(u));
  return out;
}

double LaneGraph::path_weight(std::span<const int> path) const {
  double w = 0;
  for (std::size_t k = 1; k < path.size(); ++k) {
    bool found = false;
    for (const Edge& e : edges(path[k - 1])) {
      if (e.to == path[k]) {
        w += e.w;
        found = true;
        break;
      }
    }
    if (!found) return std::numeric_limits<double>::infinity();
  }
  return w;
}

std::optional<std::vector<int>> astar(const LaneGraph& g, int start, int goal) {
  const auto n = static_cast<int>(g.size());
  if (start < 0 || goal < 0 || start >= n || goal >= n) throw InvalidInput("astar: node id out of range");
  const double inf = std::numeric_limits<double>::infinity();
  // Slightly shrunk so floating rounding never makes the heuristic overestimate.
  auto h = [&](int u) { return (g.position(u) - g.position(goal)).norm() * (1.0 - 1e-12); };

  std::vector<double> cost(static_cast<std::size_t>(n), inf);
  std::vector<int> parent(static_cast<std::size_t>(n), -1);
  std::vector<char> closed(static_cast<std::size_t>(n), 0);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  cost[static_cast<std::size_t>(start)] = 0;
  open.push({h(start), start});
  while (!open.empty()) {
    const auto [f, u] = open.top();
    open.pop();
    if (closed[static_cast<std::size_t>(u)]) continue;
    closed[static_cast<std::size_t>(u)] = 1;
    if (u == goal) break;
    for (const auto& e : g.edges(u)) {
      const double c = cost[static_cast<std::size_t>(u)] + e.w;
      if (c < cost[static_cast<std::size_t>(e.to)]) {
        cost[static_cast<std::size_t>(e.to)] = c;
        parent[static_cast<std::size_t>(e.to)] = u;
        open.push({c + h(e.to), e.to});
      }
    }
  }
  if (!std::isfinite(cost[static_cast<std::size_t>(goal)])) return std::nullopt;
  std::vector<int> path;
  for (int u = goal; u != -1; u = parent[static_cast<std::size_t>(u)]) path.push_back(u);
  std::reverse(path.begin(), path.end());
  return path;
}

}  // namespace occsim
