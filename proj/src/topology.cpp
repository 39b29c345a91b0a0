#include "occsim/topology.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>
#include <array>
#include <tuple>

#include <spdlog/spdlog.h>

namespace occsim {

void TopologyParams::validate() const {
  if (!(w_lane > 0 && tau_prune > 0 && tau_obs > 0 && probe_length > 0 && probe_width > 0)) {
    throw InvalidInput("topology parameters must be positive");
  }
}

int RoadGraph::add_node(const Vec2& pixel) {
  pos_.push_back(pixel);
  alive_.push_back(1);
  adj_.emplace_back();
  return static_cast<int>(pos_.size()) - 1;
}

void RoadGraph::add_edge(int u, int v, double w) {
  if (u == v) return;
  adj_[static_cast<std::size_t>(u)][v] = w;
  adj_[static_cast<std::size_t>(v)][u] = w;
}

void RoadGraph::remove_edge(int u, int v) {
  adj_[static_cast<std::size_t>(u)].erase(v);
  adj_[static_cast<std::size_t>(v)].erase(u);
}

void RoadGraph::remove_node(int u) {
  for (const auto& [v, w] : adj_[static_cast<std::size_t>(u)]) adj_[static_cast<std::size_t>(v)].erase(u);
  adj_[static_cast<std::size_t>(u)].clear();
  alive_[static_cast<std::size_t>(u)] = 0;
}

Vec2 RoadGraph::pixel_to_world(const Vec2& p) const {
  const double vs = geometry_.voxel_size;
  return geometry_.origin.apply({(p.x() + 0.5 - geometry_.nx * 0.5) * vs,
                                 (p.y() + 0.5 - geometry_.ny * 0.5) * vs});
}

Vec2 RoadGraph::world(int u) const { return pixel_to_world(pixel(u)); }

std::vector<int> RoadGraph::nodes() const {
  std::vector<int> out;
  for (int u = 0; u < id_bound(); ++u)
    if (alive(u)) out.push_back(u);
  return out;
}

std::size_t RoadGraph::node_count() const {
  return static_cast<std::size_t>(std::count(alive_.begin(), alive_.end(), 1));
}

std::size_t RoadGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& a : adj_) n += a.size();
  return n / 2;
}

std::vector<int> RoadGraph::nodes_with_degree(int deg) const {
  std::vector<int> out;
  for (int u = 0; u < id_bound(); ++u)
    if (alive(u) && degree(u) == deg) out.push_back(u);
  return out;
}

std::vector<int> RoadGraph::junctions() const {
  std::vector<int> out;
  for (int u = 0; u < id_bound(); ++u)
    if (alive(u) && degree(u) > 2) out.push_back(u);
  return out;
}

Mask2D road_mask(const GlobalMap& map) {
  Mask2D m(map.dims().x, map.dims().y);
  const Label road = map.table().road();
  for (int x = 0; x < m.width; ++x)
    for (int y = 0; y < m.height; ++y) m.at(x, y) = map.at(x, y, 0) == road;
  return m;
}

Mask2D zhang_suen(const Mask2D& mask) {
  Mask2D img = mask;
  const int W = img.width, H = img.height;
  auto px = [&](int i, int j) -> int {
    return img.at(std::clamp(i, 0, W - 1), std::clamp(j, 0, H - 1)) ? 1 : 0;
  };
  std::vector<std::pair<int, int>> doomed;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      doomed.clear();
      for (int i = 0; i < W; ++i) {
        for (int j = 0; j < H; ++j) {
          if (!img.at(i, j)) continue;
          // P2..P9 clockwise from "north" (i - 1).
          const int p[8] = {px(i - 1, j),     px(i - 1, j + 1), px(i, j + 1), px(i + 1, j + 1),
                            px(i + 1, j),     px(i + 1, j - 1), px(i, j - 1), px(i - 1, j - 1)};
          const int b = p[0] + p[1] + p[2] + p[3] + p[4] + p[5] + p[6] + p[7];
          if (b < 2 || b > 6) continue;
          int a = 0;
          for (int k = 0; k < 8; ++k) a += (p[k] == 0 && p[(k + 1) % 8] == 1);
          if (a != 1) continue;
          const int p2 = p[0], p4 = p[2], p6 = p[4], p8 = p[6];
          if (pass == 0) {
            if (p2 * p4 * p6 != 0 || p4 * p6 * p8 != 0) continue;
          } else {
            if (p2 * p4 * p8 != 0 || p2 * p6 * p8 != 0) continue;
          }
          doomed.emplace_back(i, j);
        }
      }
      for (auto [i, j] : doomed) img.at(i, j) = 0;
      if (!doomed.empty()) changed = true;
    }
  }
  return img;
}

void clear_square_blocks(Mask2D& s) {
  for (int x = 0; x + 1 < s.width; ++x) {
    for (int y = 0; y + 1 < s.height; ++y) {
      if (s.at(x, y) && s.at(x + 1, y) && s.at(x, y + 1) && s.at(x + 1, y + 1)) s.at(x + 1, y + 1) = 0;
    }
  }
}

Mask2D skeletonize(const Mask2D& mask) {
  Mask2D s = zhang_suen(mask);
  clear_square_blocks(s);
  return s;
}

void break_triangles(RoadGraph& g) {
  bool found = true;
  while (found) {
    found = false;
    for (int u = 0; u < g.id_bound(); ++u) {
      if (!g.alive(u)) continue;
      std::vector<int> nb;
      for (const auto& [v, w] : g.neighbors(u))
        if (v > u) nb.push_back(v);
      for (std::size_t a = 0; a < nb.size(); ++a) {
        for (std::size_t b = a + 1; b < nb.size(); ++b) {
          const int v = nb[a], w = nb[b];
          if (!g.has_edge(u, v) || !g.has_edge(u, w) || !g.has_edge(v, w)) continue;
          // Longest edge; ties go to the lexicographically largest endpoint pair.
          std::array<std::tuple<double, int, int>, 3> edges = {
              std::tuple{g.weight(u, v), u, v}, std::tuple{g.weight(u, w), u, w},
              std::tuple{g.weight(v, w), v, w}};
          const auto worst = *std::max_element(edges.begin(), edges.end());
          g.remove_edge(std::get<1>(worst), std::get<2>(worst));
          found = true;
        }
      }
    }
  }
}

RoadGraph build_graph(const Mask2D& skeleton, const GridGeometry& geometry) {
  RoadGraph g(geometry);
  std::vector<int> id(skeleton.bits.size(), -1);
  for (int x = 0; x < skeleton.width; ++x) {
    for (int y = 0; y < skeleton.height; ++y) {
      if (skeleton.at(x, y)) id[static_cast<std::size_t>(x) * skeleton.height + y] = g.add_node(Vec2(x, y));
    }
  }
  const double diag = std::sqrt(2.0);
  for (int x = 0; x < skeleton.width; ++x) {
    for (int y = 0; y < skeleton.height; ++y) {
      const int u = id[static_cast<std::size_t>(x) * skeleton.height + y];
      if (u < 0) continue;
      for (auto [dx, dy] : {std::pair{1, -1}, std::pair{1, 0}, std::pair{1, 1}, std::pair{0, 1}}) {
        if (!skeleton.in_bounds(x + dx, y + dy)) continue;
        const int v = id[static_cast<std::size_t>(x + dx) * skeleton.height + y + dy];
        if (v >= 0) g.add_edge(u, v, (dx != 0 && dy != 0) ? diag : 1.0);
      }
    }
  }
  break_triangles(g);
  return g;
}

namespace {

struct Chain {
  std::vector<int> nodes;  // starts at the leaf, excludes `end`
  int end = -1;            // first node with degree != 2
  double weight = 0.0;
};

Chain walk_from_leaf(const RoadGraph& g, int leaf) {
  Chain c;
  c.nodes.push_back(leaf);
  int prev = leaf;
  int cur = g.neighbors(leaf).begin()->first;
  c.weight = g.weight(leaf, cur);
  while (g.degree(cur) == 2) {
    c.nodes.push_back(cur);
    int next = -1;
    for (const auto& [v, w] : g.neighbors(cur))
      if (v != prev) next = v;
    if (next < 0 || next == leaf) break;
    c.weight += g.weight(cur, next);
    prev = cur;
    cur = next;
  }
  c.end = cur;
  return c;
}

bool prune_one_spur(RoadGraph& g, double tau_px) {
  std::vector<Chain> spurs;
  for (int l : g.nodes_with_degree(1)) {
    Chain c = walk_from_leaf(g, l);
    if (g.degree(c.end) > 2 && c.weight < tau_px) spurs.push_back(std::move(c));
  }
  if (spurs.empty()) return false;
  const auto best = std::min_element(spurs.begin(), spurs.end(), [](const Chain& a, const Chain& b) {
    return std::tie(a.weight, a.nodes.front()) < std::tie(b.weight, b.nodes.front());
  });
  for (int u : best->nodes) g.remove_node(u);
  return true;
}

/// Interior nodes of the shortest u-v path no longer than `limit`.
std::vector<int> short_path_interior(const RoadGraph& g, int u, int v, double limit) {
  std::vector<double> dist(static_cast<std::size_t>(g.id_bound()), std::numeric_limits<double>::infinity());
  std::vector<int> parent(static_cast<std::size_t>(g.id_bound()), -1);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[static_cast<std::size_t>(u)] = 0;
  pq.emplace(0.0, u);
  while (!pq.empty()) {
    auto [d, x] = pq.top();
    pq.pop();
    if (d > dist[static_cast<std::size_t>(x)] || d > limit) continue;
    if (x == v) break;
    for (const auto& [y, w] : g.neighbors(x)) {
      if (d + w < dist[static_cast<std::size_t>(y)]) {
        dist[static_cast<std::size_t>(y)] = d + w;
        parent[static_cast<std::size_t>(y)] = x;
        pq.emplace(d + w, y);
      }
    }
  }
  std::vector<int> interior;
  if (!(dist[static_cast<std::size_t>(v)] <= limit)) return interior;
  for (int x = parent[static_cast<std::size_t>(v)]; x >= 0 && x != u; x = parent[static_cast<std::size_t>(x)]) {
    interior.push_back(x);
  }
  return interior;
}

struct Cluster {
  Vec2 sum = Vec2::Zero();
  int count = 0;
};

bool contract_one_pair(RoadGraph& g, double radius_px, std::vector<Cluster>& clusters) {
  const auto junc = g.junctions();
  std::tuple<double, int, int> best{std::numeric_limits<double>::infinity(), -1, -1};
  for (std::size_t a = 0; a < junc.size(); ++a) {
    for (std::size_t b = a + 1; b < junc.size(); ++b) {
      const double d = (g.pixel(junc[a]) - g.pixel(junc[b])).norm();
      if (d < radius_px) best = std::min(best, std::tuple{d, junc[a], junc[b]});
    }
  }
  const auto [d, u, v] = best;
  if (u < 0) return false;

  auto cluster_of = [&](int n) {
    if (static_cast<std::size_t>(n) >= clusters.size()) clusters.resize(static_cast<std::size_t>(g.id_bound()));
    Cluster& c = clusters[static_cast<std::size_t>(n)];
    if (c.count == 0) c = {g.pixel(n), 1};
    return c;
  };
  const Cluster cu = cluster_of(u), cv = cluster_of(v);
  Cluster merged{cu.sum + cv.sum, cu.count + cv.count};
  clusters[static_cast<std::size_t>(u)] = merged;
  const Vec2 centroid = merged.sum / merged.count;

  std::vector<int> absorbed = short_path_interior(g, u, v, 2.0 * radius_px);
  absorbed.push_back(v);
  std::vector<int> outer;
  for (int x : absorbed) {
    for (const auto& [y, w] : g.neighbors(x)) outer.push_back(y);
  }
  for (int x : absorbed) g.remove_node(x);
  g.set_pixel(u, centroid);
  for (const auto& [y, w] : std::map<int, double>(g.neighbors(u))) g.add_edge(u, y);
  for (int y : outer) {
    if (y != u && g.alive(y)) g.add_edge(u, y);
  }
  return true;
}

}  // namespace

RoadGraph clean_graph(RoadGraph g, const TopologyParams& params) {
  params.validate();
  const double vs = g.geometry().voxel_size > 0 ? g.geometry().voxel_size : 1.0;
  const double tau_px = params.tau_prune / vs;
  const double radius_px = 2.0 * params.w_lane / vs;
  std::vector<Cluster> clusters;
  bool changed = true;
  while (changed) {
    changed = false;
    while (prune_one_spur(g, tau_px)) changed = true;
    while (contract_one_pair(g, radius_px, clusters)) changed = true;
  }
  return g;
}

std::vector<int> filter_endpoints(RoadGraph& g, const GlobalMap& map, const TopologyParams& params) {
  params.validate();
  const Mask2D road = road_mask(map);
  const double vs = map.voxel_size();
  const double probe_px = 1.5 * params.w_lane / vs;
  const double box_len = params.probe_length / vs, box_half = 0.5 * params.probe_width / vs;
  const auto& table = map.table();

  std::vector<int> valid;
  for (int v : g.nodes_with_degree(1)) {
    const Chain chain = walk_from_leaf(g, v);
    std::vector<int> path = chain.nodes;
    path.push_back(chain.end);
    const Vec2 pv = g.pixel(v);
    Vec2 ref = g.pixel(path.back());
    for (std::size_t k = 1; k < path.size(); ++k) {
      if ((g.pixel(path[k]) - pv).norm() >= 3.0) {
        ref = g.pixel(path[k]);
        break;
      }
    }
    if ((pv - ref).norm() < 1e-9) {
      spdlog::info("topology: leaf {} has no usable parent direction; skipped", v);
      continue;
    }
    if (g.degree(chain.end) <= 2) spdlog::debug("topology: leaf {} lies on an isolated segment", v);
    const Vec2 d = (pv - ref).normalized();

    const Vec2 probe = pv + probe_px * d;
    const int pi = static_cast<int>(std::floor(probe.x() + 0.5)), pj = static_cast<int>(std::floor(probe.y() + 0.5));
    const bool topo_ok = !(road.in_bounds(pi, pj) && road.at(pi, pj));

    int obstacles = 0;
    if (topo_ok) {
      const Vec2 n(-d.y(), d.x());
      Vec2 lo = pv, hi = pv;
      for (const Vec2& c : {Vec2(pv + box_half * n), Vec2(pv - box_half * n),
                           Vec2(pv + box_len * d + box_half * n), Vec2(pv + box_len * d - box_half * n)}) {
        lo = lo.cwiseMin(c);
        hi = hi.cwiseMax(c);
      }
      const int i0 = std::max(0, static_cast<int>(std::floor(lo.x()))),
                i1 = std::min(map.dims().x - 1, static_cast<int>(std::ceil(hi.x())));
      const int j0 = std::max(0, static_cast<int>(std::floor(lo.y()))),
                j1 = std::min(map.dims().y - 1, static_cast<int>(std::ceil(hi.y())));
      for (int i = i0; i <= i1; ++i) {
        for (int j = j0; j <= j1; ++j) {
          const Vec2 r = Vec2(i, j) - pv;
          const double along = r.dot(d), across = std::abs(cross2(d, r));
          if (along < 0 || along > box_len || across > box_half) continue;
          for (int z = 1; z < map.dims().z; ++z) obstacles += table.is_obstacle(map.at(i, j, z));
        }
      }
    }
    if (topo_ok && obstacles < params.tau_obs) {
      valid.push_back(v);
    } else {
      spdlog::debug("topology: leaf {} rejected (topology probe {}, {} obstacle voxels)", v,
                    topo_ok ? "clear" : "on road", obstacles);
    }
  }
  g.valid_endpoints = valid;
  return valid;
}

RoadGraph extract_topology(const GlobalMap& map, const TopologyParams& params) {
  params.validate();
  const Mask2D skel = skeletonize(road_mask(map));
  RoadGraph g = clean_graph(build_graph(skel, map.geometry()), params);
  filter_endpoints(g, map, params);
  spdlog::info("topology: {} nodes, {} edges, {} junctions, {} valid endpoints", g.node_count(),
               g.edge_count(), g.junctions().size(), g.valid_endpoints.size());
  return g;
}

std::vector<std::vector<int>> extract_segments(const RoadGraph& g) {
  std::vector<std::vector<int>> segments;
  auto edge_key = [](int a, int b) { return std::pair{std::min(a, b), std::max(a, b)}; };
  std::set<std::pair<int, int>> visited_edges;

  for (int s : g.nodes()) {
    if (g.degree(s) == 2 || g.degree(s) == 0) continue;
    for (const auto& [first, w0] : g.neighbors(s)) {
      if (visited_edges.count(edge_key(s, first))) continue;
      std::vector<int> seg{s};
      int prev = s, cur = first;
      visited_edges.insert(edge_key(s, first));
      while (true) {
        seg.push_back(cur);
        if (g.degree(cur) != 2) break;
        int next = -1;
        for (const auto& [v, w] : g.neighbors(cur))
          if (v != prev) next = v;
        if (next < 0 || visited_edges.count(edge_key(cur, next))) break;
        visited_edges.insert(edge_key(cur, next));
        prev = cur;
        cur = next;
      }
      segments.push_back(std::move(seg));
    }
  }
  // Pure cycles: every node has degree 2.
  for (int s : g.nodes()) {
    if (g.degree(s) != 2) continue;
    const int first = g.neighbors(s).begin()->first;
    if (visited_edges.count(edge_key(s, first))) continue;
    std::vector<int> seg{s};
    int prev = s, cur = first;
    visited_edges.insert(edge_key(s, first));
    while (cur != s) {
      seg.push_back(cur);
      int next = -1;
      for (const auto& [v, w] : g.neighbors(cur))
        if (v != prev) next = v;
      if (next < 0) break;
      visited_edges.insert(edge_key(cur, next));
      prev = cur;
      cur = next;
    }
    seg.push_back(s);
    segments.push_back(std::move(seg));
  }
  return segments;
}

}  // namespace occsim
