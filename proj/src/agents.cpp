#include "occsim/agents.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <spdlog/spdlog.h>

#include "byte_io.hpp"
#include "occsim/serialization.hpp"
#include "occsim/topology.hpp"

namespace occsim {

LayoutHeatmap::LayoutHeatmap(int w, int h, double mpc)
    : width(w), height(h), meters_per_cell(mpc), values(static_cast<std::size_t>(w) * h, 0.0f) {
  if (w <= 0 || h <= 0 || !(mpc > 0)) throw InvalidInput("heatmap dims and cell size must be positive");
}

Vec2 LayoutHeatmap::cell_center(int i, int j) const {
  return {(i + 0.5 - width / 2.0) * meters_per_cell, (j + 0.5 - height / 2.0) * meters_per_cell};
}

std::optional<std::pair<int, int>> LayoutHeatmap::cell_of(const Vec2& p) const {
  const double u = p.x() / meters_per_cell + width / 2.0;
  const double v = p.y() / meters_per_cell + height / 2.0;
  if (!(u >= 0 && v >= 0 && u < width && v < height)) return std::nullopt;
  return std::pair{static_cast<int>(std::floor(u)), static_cast<int>(std::floor(v))};
}

LayoutHeatmap encode_heatmap(const AgentLayout& layout, int width, int height, double meters_per_cell) {
  LayoutHeatmap h(width, height, meters_per_cell);
  std::vector<double> acc(h.values.size(), 0.0);
  for (const auto& e : layout.entries) {
    const auto cell = h.cell_of(e.position);
    if (!cell) throw InvalidInput("encode_heatmap: vehicle outside the heatmap");
    const double sign = e.state == AgentState::stationary ? 1.0 : -1.0;
    for (int di = -kKernelRadius; di <= kKernelRadius; ++di) {
      for (int dj = -kKernelRadius; dj <= kKernelRadius; ++dj) {
        const int r2 = di * di + dj * dj;
        const int i = cell->first + di, j = cell->second + dj;
        if (r2 > kKernelRadius * kKernelRadius || !h.in_bounds(i, j)) continue;
        acc[static_cast<std::size_t>(i) * height + j] += sign * std::exp(-r2 / (2.0 * kKernelSigma * kKernelSigma));
      }
    }
  }
  for (std::size_t k = 0; k < acc.size(); ++k) h.values[k] = static_cast<float>(acc[k]);
  return h;
}

AgentLayout decode_heatmap(const LayoutHeatmap& h, double peak_threshold) {
  struct Peak {
    float mag;
    int i, j;
  };
  std::vector<Peak> peaks;
  for (int i = 0; i < h.width; ++i) {
    for (int j = 0; j < h.height; ++j) {
      const float v = h.at(i, j);
      if (!std::isfinite(v)) throw InvalidInput("decode_heatmap: non-finite value");
      const float m = std::fabs(v);
      if (!(m > peak_threshold)) continue;
      bool is_max = true;
      for (int di = -1; di <= 1 && is_max; ++di)
        for (int dj = -1; dj <= 1 && is_max; ++dj)
          if ((di || dj) && h.in_bounds(i + di, j + dj) && std::fabs(h.at(i + di, j + dj)) > m) is_max = false;
      if (is_max) peaks.push_back({m, i, j});
    }
  }
  std::stable_sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) { return a.mag > b.mag; });
  AgentLayout out;
  std::vector<Peak> kept;
  for (const Peak& p : peaks) {
    bool suppressed = false;
    for (const Peak& k : kept) {
      const int di = p.i - k.i, dj = p.j - k.j;
      if (di * di + dj * dj <= kKernelRadius * kKernelRadius) {
        suppressed = true;
        break;
      }
    }
    if (suppressed) continue;
    kept.push_back(p);
    out.entries.push_back({h.cell_center(p.i, p.j),
                           h.at(p.i, p.j) > 0 ? AgentState::stationary : AgentState::moving});
  }
  return out;
}

void write_heatmap(const LayoutHeatmap& h, const std::filesystem::path& path) {
  detail::ByteWriter w;
  w.raw("OCCH");
  w.le(std::uint32_t{1});
  w.le(static_cast<std::uint32_t>(h.width));
  w.le(static_cast<std::uint32_t>(h.height));
  w.le(h.meters_per_cell);
  for (float v : h.values) w.le(v);
  write_bytes(path, w.bytes());
}

LayoutHeatmap read_heatmap(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  detail::ByteReader r(bytes);
  r.expect("OCCH", "heatmap");
  const auto version_at = r.pos();
  if (r.le<std::uint32_t>("heatmap version") != 1) throw FormatError("unsupported heatmap version", version_at);
  const auto w = r.le<std::uint32_t>("heatmap width");
  const auto hgt = r.le<std::uint32_t>("heatmap height");
  const auto mpc = r.le<double>("heatmap cell size");
  if (w == 0 || hgt == 0 || w > 100000 || hgt > 100000 || !(mpc > 0))
    throw FormatError("invalid heatmap header", 8);
  LayoutHeatmap h(static_cast<int>(w), static_cast<int>(hgt), mpc);
  r.need(h.values.size() * 4, "heatmap payload");
  for (float& v : h.values) v = r.le<float>("heatmap payload");
  if (r.remaining() != 0) throw FormatError("trailing bytes after heatmap payload", r.pos());
  return h;
}

std::pair<int, int> transform_cell(GridTransform t, int i, int j, int width, int height) {
  switch (t) {
    case GridTransform::identity: return {i, j};
    case GridTransform::rot90: return {width - 1 - j, i};
    case GridTransform::rot180: return {width - 1 - i, height - 1 - j};
    case GridTransform::rot270: return {j, height - 1 - i};
    case GridTransform::flip_x: return {width - 1 - i, j};
    case GridTransform::flip_y: return {i, height - 1 - j};
  }
  return {i, j};
}

namespace {

bool quarter_turn(GridTransform t) { return t == GridTransform::rot90 || t == GridTransform::rot270; }

Vec2 transform_point(GridTransform t, const Vec2& p) {
  switch (t) {
    case GridTransform::identity: return p;
    case GridTransform::rot90: return {-p.y(), p.x()};
    case GridTransform::rot180: return -p;
    case GridTransform::rot270: return {p.y(), -p.x()};
    case GridTransform::flip_x: return {-p.x(), p.y()};
    case GridTransform::flip_y: return {p.x(), -p.y()};
  }
  return p;
}

Vec2 normalized_or(const Vec2& v, const Vec2& fallback) {
  const double n = v.norm();
  return n > 1e-12 ? Vec2(v / n) : fallback;
}

}  // namespace

OccupancyGrid transform_grid(const OccupancyGrid& grid, GridTransform t) {
  const auto& d = grid.dims();
  if (quarter_turn(t) && d.x != d.y) throw InvalidInput("quarter-turn transform needs a square grid");
  OccupancyGrid out(d, grid.voxel_size(), grid.origin(), grid.table());
  for (int i = 0; i < d.x; ++i) {
    for (int j = 0; j < d.y; ++j) {
      const auto [ti, tj] = transform_cell(t, i, j, d.x, d.y);
      for (int z = 0; z < d.z; ++z) out.at(ti, tj, z) = grid.at(i, j, z);
    }
  }
  return out;
}

AugmentResult augment(const AgentLayout& layout, const OccupancyGrid& grid, std::uint64_t seed,
                      const AugmentOptions& options) {
  Rng rng(seed);
  AugmentResult res{layout, grid, GridTransform::identity};
  auto& entries = res.layout.entries;

  if (options.cap && entries.size() > kMaxLayoutVehicles) {
    std::vector<std::size_t> idx(entries.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t k = 0; k < kMaxLayoutVehicles; ++k) std::swap(idx[k], idx[k + rng.index(idx.size() - k)]);
    idx.resize(kMaxLayoutVehicles);
    std::sort(idx.begin(), idx.end());
    std::vector<LayoutEntry> kept;
    for (std::size_t k : idx) kept.push_back(entries[k]);
    entries = std::move(kept);
  }

  const LayoutHeatmap frame(grid.dims().x, grid.dims().y, grid.voxel_size());
  if (options.perturb) {
    const Mask2D drivable = road_mask(grid);
    for (auto& e : entries) {
      const auto cell = frame.cell_of(e.position);
      if (!cell) throw InvalidInput("augment: vehicle outside the grid footprint");
      std::vector<std::pair<int, int>> candidates;
      for (int di = -2; di <= 2; ++di)
        for (int dj = -2; dj <= 2; ++dj) {
          const int i = cell->first + di, j = cell->second + dj;
          if (drivable.in_bounds(i, j) && drivable.at(i, j)) candidates.emplace_back(i, j);
        }
      if (candidates.empty()) continue;
      const auto [i, j] = candidates[rng.index(candidates.size())];
      e.position = frame.cell_center(i, j);
    }
  }

  if (options.transform) {
    res.transform = *options.transform;
  } else {
    std::vector<GridTransform> pool{GridTransform::identity, GridTransform::rot180, GridTransform::flip_x,
                                    GridTransform::flip_y};
    if (grid.dims().x == grid.dims().y) {
      pool = {GridTransform::identity, GridTransform::rot90,  GridTransform::rot180,
              GridTransform::rot270,   GridTransform::flip_x, GridTransform::flip_y};
    }
    res.transform = pool[rng.index(pool.size())];
  }
  if (res.transform != GridTransform::identity) {
    res.grid = transform_grid(grid, res.transform);
    for (auto& e : entries) e.position = transform_point(res.transform, e.position);
  }
  return res;
}

std::vector<AgentAsset> default_assets(const SemanticTable& table) {
  const Label v = table.vehicle();
  return {{4.5, 1.9, 1.6, v}, {5.2, 2.0, 1.9, v}, {4.2, 1.8, 1.5, v}};
}

std::vector<Vec2> Agent::remaining_route() const {
  std::vector<Vec2> out{position};
  for (std::size_t k = next; k < route.size(); ++k) out.push_back(route[k]);
  return out;
}

HeatmapLayoutSource::HeatmapLayoutSource(LayoutHeatmap heatmap, double peak_threshold)
    : layout_(decode_heatmap(heatmap, peak_threshold)) {}

AgentLayout HeatmapLayoutSource::sample(const OccupancyGrid&, const Pose2&, const Scene&, Rng&) {
  return layout_;
}

AgentLayout ProceduralLayoutSource::sample(const OccupancyGrid& local, const Pose2& anchor,
                                           const Scene& scene, Rng& rng) {
  const double hx = local.dims().x * 0.5 * local.voxel_size();
  const double hy = local.dims().y * 0.5 * local.voxel_size();
  std::vector<Vec2> candidates;
  for (const Lane& lane : scene.lanes) {
    for (const Vec2& p : lane.points) {
      const Vec2 q = anchor.apply_inverse(p);
      if (std::fabs(q.x()) <= hx && std::fabs(q.y()) <= hy) candidates.push_back(q);
    }
  }
  AgentLayout out;
  if (candidates.empty()) return out;
  const auto k = static_cast<std::size_t>(rng.index(static_cast<std::uint64_t>(max_vehicles) + 1));
  for (std::size_t attempt = 0; attempt < 20 * k && out.entries.size() < k; ++attempt) {
    const Vec2 p = candidates[rng.index(candidates.size())];
    const bool spaced = std::all_of(out.entries.begin(), out.entries.end(),
                                    [&](const LayoutEntry& e) { return (e.position - p).norm() >= min_spacing; });
    if (!spaced) continue;
    out.entries.push_back({p, rng.bernoulli(p_static) ? AgentState::stationary : AgentState::moving});
  }
  return out;
}

Vec2 node_tangent(const Scene& scene, int node) {
  const int l = scene.graph.lane_of(node), s = scene.graph.sample_of(node);
  if (l < 0 || s < 0) return Vec2::UnitX();
  const auto& pts = scene.lanes[static_cast<std::size_t>(l)].points;
  const std::size_t a = s > 0 ? static_cast<std::size_t>(s) - 1 : 0;
  const std::size_t b = std::min(static_cast<std::size_t>(s) + 1, pts.size() - 1);
  return normalized_or(pts[b] - pts[a], Vec2::UnitX());
}

std::vector<Agent> spawn_agents(const Pose2& anchor, bool with_ego, const Scene& scene, LayoutSource& source,
                                std::uint64_t seed, const std::vector<Agent>& existing,
                                const SpawnParams& params, int first_id) {
  if (scene.lanes.empty() || scene.graph.size() == 0) throw InvalidInput("spawn_agents: empty lane set");
  if (scene.endpoints.empty()) throw InvalidInput("spawn_agents: no valid endpoints");
  if (scene.assets.empty()) throw InvalidInput("spawn_agents: empty asset pool");
  Rng rng(seed);

  const OccupancyGrid local = crop(scene.map, anchor, params.crop_dims);
  const AgentLayout layout = source.sample(local, anchor, scene, rng);

  struct Request {
    Vec2 position;
    AgentState state;
    bool ego;
  };
  std::vector<Request> requests;
  if (with_ego) requests.push_back({anchor.translation(), AgentState::moving, true});
  for (const auto& e : layout.entries) requests.push_back({anchor.apply(e.position), e.state, false});

  std::vector<int> goal_nodes;
  for (const Vec2& e : scene.endpoints)
    goal_nodes.push_back(*scene.graph.nearest(e, std::numeric_limits<double>::infinity()));

  std::vector<Agent> out;
  auto too_close = [&](const Vec2& p) {
    for (const Agent& a : existing)
      if ((a.position - p).norm() < params.min_spacing) return true;
    for (const Agent& a : out)
      if ((a.position - p).norm() < params.min_spacing) return true;
    return false;
  };

  auto closing = [&](const Agent& f, const Agent& l) {
    if (f.is_static || !(f.speed > 0.0)) return false;
    const Vec2 d = l.position - f.position;
    const double n = d.norm();
    if (n <= 0.0) return true;
    if (!(d.dot(f.heading) / n > 0.5)) return false;
    if (!(point_polyline_distance(l.position, f.remaining_route()) < params.d_lat)) return false;
    const double dv = f.heading.dot(l.heading) < -0.5 ? f.speed + l.speed : f.speed - l.speed;
    if (!(dv > 0.0)) return false;
    const double gap = n - 0.5 * (scene.assets[static_cast<std::size_t>(f.asset_id)].length +
                                  scene.assets[static_cast<std::size_t>(l.asset_id)].length);
    return gap < params.conflict_s0 + dv * params.conflict_reaction + dv * dv / (2.0 * params.conflict_brake);
  };
  auto in_conflict = [&](const Agent& a, const std::vector<Agent>& others) {
    return std::any_of(others.begin(), others.end(),
                       [&](const Agent& o) { return closing(a, o) || closing(o, a); });
  };

  int next_id = first_id;
  for (const Request& req : requests) {
    const auto snapped = scene.graph.nearest(req.position, params.snap_radius);
    if (!snapped) {
      spdlog::debug("spawn: no lane within {} m of ({:.2f}, {:.2f}); discarded", params.snap_radius,
                    req.position.x(), req.position.y());
      continue;
    }
    const Vec2 pos = scene.graph.position(*snapped);
    if (!req.ego && too_close(pos)) {
      spdlog::debug("spawn: ({:.2f}, {:.2f}) too close to another agent; discarded", pos.x(), pos.y());
      continue;
    }
    Agent a;
    a.position = pos;
    a.is_ego = req.ego;
    a.asset_id = static_cast<int>(rng.index(scene.assets.size()));
    if (req.state == AgentState::stationary) {
      a.is_static = true;
      a.route = {pos};
      a.next = 1;
      a.target = pos;
      a.heading = node_tangent(scene, *snapped);
    } else {
      a.desired_speed = std::max(0.0, rng.normal(params.speed.mean, params.speed.stddev));
      a.speed = a.desired_speed;

      std::vector<std::size_t> order(scene.endpoints.size());
      std::iota(order.begin(), order.end(), 0);
      for (std::size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[rng.index(k)]);
      std::optional<std::vector<int>> path;
      for (std::size_t idx : order) {
        if (goal_nodes[idx] == *snapped) continue;
        path = astar(scene.graph, *snapped, goal_nodes[idx]);
        if (path) {
          a.target = scene.endpoints[idx];
          break;
        }
      }
      if (!path) {
        spdlog::info("spawn: no reachable target from ({:.2f}, {:.2f}); agent discarded", pos.x(), pos.y());
        continue;
      }
      a.route = scene.graph.polyline(*path);
      a.next = 1;
      a.heading = normalized_or(a.route[1] - a.route[0], node_tangent(scene, *snapped));
    }
    if (!req.ego && (in_conflict(a, existing) || in_conflict(a, out))) {
      spdlog::debug("spawn: ({:.2f}, {:.2f}) conflicts with nearby traffic; discarded", pos.x(), pos.y());
      continue;
    }
    a.id = next_id++;
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace occsim
