#include <doctest.h>

#include <limits>
#include <queue>

#include "occsim/lane_graph.hpp"
#include "occsim/rng.hpp"

using namespace occsim;

namespace {

struct Oracle {
  std::vector<double> dist;
  std::vector<int> parent;
};

/// Textbook Dijkstra with a binary heap and lazy deletion.
Oracle dijkstra(const LaneGraph& g, int s) {
  const double inf = std::numeric_limits<double>::infinity();
  Oracle o{std::vector<double>(g.size(), inf), std::vector<int>(g.size(), -1)};
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  o.dist[static_cast<std::size_t>(s)] = 0;
  pq.push({0, s});
  while (!pq.empty()) {
    auto [d, u] = pq.top();
    pq.pop();
    if (d > o.dist[static_cast<std::size_t>(u)]) continue;
    for (const auto& e : g.edges(u)) {
      if (d + e.w < o.dist[static_cast<std::size_t>(e.to)]) {
        o.dist[static_cast<std::size_t>(e.to)] = d + e.w;
        o.parent[static_cast<std::size_t>(e.to)] = u;
        pq.push({d + e.w, e.to});
      }
    }
  }
  return o;
}

/// Random lanes: jittered polylines with random headings, linked at their ends.
LaneGraph random_lane_graph(Rng& rng) {
  std::vector<Lane> lanes;
  const int n_lanes = 2 + static_cast<int>(rng.index(6));
  for (int l = 0; l < n_lanes; ++l) {
    Lane lane;
    Vec2 p(rng.uniform(-40, 40), rng.uniform(-40, 40));
    double yaw = rng.uniform(-M_PI, M_PI);
    const int n = 5 + static_cast<int>(rng.index(40));
    for (int k = 0; k < n; ++k) {
      lane.points.push_back(p);
      yaw += rng.uniform(-0.2, 0.2);
      p += rng.uniform(0.4, 0.6) * Vec2(std::cos(yaw), std::sin(yaw));
    }
    lanes.push_back(std::move(lane));
  }
  return LaneGraph(lanes, rng.uniform(5, 25));
}

}  // namespace

TEST_CASE("A* equals Dijkstra on random lane graphs") {
  Rng rng(2024);
  int reachable = 0, unreachable = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const LaneGraph g = random_lane_graph(rng);
    const int s = static_cast<int>(rng.index(g.size()));
    const Oracle o = dijkstra(g, s);
    for (int q = 0; q < 10; ++q) {
      const int t = static_cast<int>(rng.index(g.size()));
      const auto path = astar(g, s, t);
      if (!std::isfinite(o.dist[static_cast<std::size_t>(t)])) {
        CHECK_FALSE(path.has_value());
        ++unreachable;
        continue;
      }
      REQUIRE(path.has_value());
      CHECK(path->front() == s);
      CHECK(path->back() == t);
      CHECK(g.path_weight(*path) == o.dist[static_cast<std::size_t>(t)]);
      ++reachable;
    }
  }
  CHECK(reachable > 500);
  CHECK(unreachable > 0);
}

TEST_CASE("lane graph construction") {
  std::vector<Lane> lanes(3);
  for (int k = 0; k < 10; ++k) lanes[0].points.emplace_back(0.5 * k, 0);
  for (int k = 0; k < 10; ++k) lanes[1].points.emplace_back(6.0 + 0.5 * k, 0.5);
  for (int k = 0; k < 10; ++k) lanes[2].points.emplace_back(100.0 + 0.5 * k, 0);
  const LaneGraph g(lanes, 2.0);
  CHECK(g.size() == 30u);
  CHECK(g.lane_of(12) == 1);
  CHECK(g.sample_of(12) == 2);
  // end of lane 0 at x = 4.5 links to the start of lane 1 (distance ~1.58)
  bool linked = false;
  for (const auto& e : g.edges(9)) linked = linked || e.to == 10;
  CHECK(linked);
  CHECK(astar(g, 0, 19).has_value());
  CHECK_FALSE(astar(g, 0, 20).has_value());
  CHECK(astar(g, 3, 3)->size() == 1u);
  CHECK_THROWS_AS(astar(g, 0, 99), InvalidInput);

  CHECK(g.nearest(Vec2(2.1, 0.1), 1.0) == 4);
  CHECK_FALSE(g.nearest(Vec2(50, 50), 5.0).has_value());
  CHECK(g.nearest_on_lane(Vec2(0, 0), 1) == 10);
  const std::vector<int> bad{0, 5};
  CHECK(std::isinf(g.path_weight(bad)));
}
