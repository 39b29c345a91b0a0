#include "occsim/synthworld.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "occsim/rng.hpp"

namespace occsim {

const char* recipe_name(Recipe r) {
  switch (r) {
    case Recipe::straight: return "straight";
    case Recipe::curve: return "curve";
    case Recipe::plus: return "plus";
    case Recipe::grid: return "grid";
  }
  return "straight";
}

Recipe parse_recipe(const std::string& s) {
  for (Recipe r : {Recipe::straight, Recipe::curve, Recipe::plus, Recipe::grid})
    if (s == recipe_name(r)) return r;
  throw InvalidInput("unknown road recipe: " + s);
}

void WorldSpec::validate() const {
  if (!(extent > 0 && voxel_size > 0 && road_width > 0 && sidewalk_width >= 0))
    throw InvalidInput("world extent, voxel size and widths must be positive");
  if (height < 2) throw InvalidInput("world height must be at least 2 voxels");
  if (!(obstacle_density >= 0 && obstacle_density <= 1)) throw InvalidInput("obstacle density must be in [0, 1]");
  if (road_width + 2 * sidewalk_width >= extent) throw InvalidInput("road does not fit in the world");
  if (recipe == Recipe::curve && !(curve_radius > road_width / 2 + sidewalk_width && 2 * curve_radius < extent))
    throw InvalidInput("curve radius infeasible for road width and extent");
  if (recipe == Recipe::grid) {
    if (grid_rows < 1 || grid_cols < 1) throw InvalidInput("grid recipe needs at least one block per axis");
    const double pitch = extent / std::max(grid_rows, grid_cols);
    if (road_width + 2 * sidewalk_width >= pitch) throw InvalidInput("grid blocks too small for the road width");
  }
}

namespace {

/// Signed offset of a point from a road piece, with validity of the piece.
struct Piece {
  enum Kind { line_x, line_y, arc } kind;
  double c;           ///< line: fixed coordinate; arc: unused
  double lo, hi;      ///< line: extent along the free axis
  Vec2 centre{0, 0};  ///< arc
  double radius = 0;
  double a0 = 0, a1 = 0;  ///< arc angle range

  /// Lateral offset in metres, or NaN when the point is outside the piece.
  double offset(const Vec2& p) const {
    switch (kind) {
      case line_x:
        if (p.x() < lo || p.x() > hi) return NAN;
        return p.y() - c;
      case line_y:
        if (p.y() < lo || p.y() > hi) return NAN;
        return c - p.x();
      case arc: {
        const Vec2 d = p - centre;
        const double ang = std::atan2(d.y(), d.x());
        if (ang < a0 || ang > a1) return NAN;
        return radius - d.norm();
      }
    }
    return NAN;
  }
};

std::vector<Piece> pieces(const WorldSpec& s) {
  const double h = s.extent / 2;
  const double big = 2 * s.extent;
  std::vector<Piece> out;
  switch (s.recipe) {
    case Recipe::straight:
      out.push_back({Piece::line_x, 0.0, -big, big});
      break;
    case Recipe::plus:
      out.push_back({Piece::line_x, 0.0, -big, big});
      out.push_back({Piece::line_y, 0.0, -big, big});
      break;
    case Recipe::grid:
      for (int r = 1; r < s.grid_rows; ++r) out.push_back({Piece::line_x, -h + r * s.extent / s.grid_rows, -big, big});
      for (int c = 1; c < s.grid_cols; ++c) out.push_back({Piece::line_y, -h + c * s.extent / s.grid_cols, -big, big});
      break;
    case Recipe::curve: {
      const double R = s.curve_radius, q = R / 2;
      out.push_back({Piece::line_x, -q, -big, -q});
      Piece a{Piece::arc, 0, 0, 0};
      a.centre = Vec2(-q, q);
      a.radius = R;
      a.a0 = -M_PI / 2;
      a.a1 = 0.0;
      out.push_back(a);
      out.push_back({Piece::line_y, q, q, big});
      break;
    }
  }
  return out;
}

bool within(const std::vector<Piece>& ps, const Vec2& p, int n_cells, double vs) {
  for (const Piece& piece : ps) {
    const double d = piece.offset(p);
    if (std::isnan(d)) continue;
    const double u = d / vs;
    if (u >= -n_cells / 2.0 && u < n_cells / 2.0) return true;
  }
  return false;
}

}  // namespace

GlobalMap generate_world(const WorldSpec& spec) {
  spec.validate();
  const SemanticTable& table = spec.table;
  Label terrain = 0, building = 0, free_label = table.unassigned();
  bool have_terrain = false, have_building = false, have_free = false;
  for (const auto& e : table.entries()) {
    if (e.role == Role::ground && !have_terrain) terrain = e.id, have_terrain = true;
    if (e.role == Role::obstacle && !have_building) building = e.id, have_building = true;
    if (e.role == Role::free && !have_free) free_label = e.id, have_free = true;
  }
  if (!have_terrain || !have_building) throw InvalidInput("world table needs ground and obstacle categories");

  const double vs = spec.voxel_size;
  int n = static_cast<int>(std::lround(spec.extent / vs));
  n += n % 2;
  GlobalMap map({n, n, spec.height}, vs, Pose2::identity(), table, free_label);
  const GridGeometry geo = map.geometry();

  const auto ps = pieces(spec);
  const int n_road = static_cast<int>(std::lround(spec.road_width / vs));
  const int n_walk = static_cast<int>(std::lround((spec.road_width + 2 * spec.sidewalk_width) / vs));
  Mask2D offroad(n, n, 0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Vec2 c = geo.cell_center_world(i, j);
      Label l = terrain;
      if (within(ps, c, n_road, vs)) {
        l = table.road();
      } else if (spec.sidewalk_width > 0 && within(ps, c, n_walk, vs)) {
        l = table.sidewalk();
      } else {
        offroad.at(i, j) = 1;
      }
      map.at(i, j, 0) = l;
    }
  }

  // Buildings: random boxes clipped to off-road terrain.
  Rng rng(derive_seed(spec.seed, "buildings"));
  const double target = spec.obstacle_density * static_cast<double>(offroad.count());
  double covered = 0;
  for (int attempt = 0; attempt < 10000 && covered < target; ++attempt) {
    const int w = 10 + static_cast<int>(rng.index(21));
    const int d = 10 + static_cast<int>(rng.index(21));
    const int hgt = std::min(spec.height - 1, 5 + static_cast<int>(rng.index(11)));
    const int i0 = static_cast<int>(rng.index(static_cast<std::uint64_t>(n)));
    const int j0 = static_cast<int>(rng.index(static_cast<std::uint64_t>(n)));
    for (int i = i0; i < std::min(n, i0 + w); ++i) {
      for (int j = j0; j < std::min(n, j0 + d); ++j) {
        if (!offroad.at(i, j) || map.at(i, j, 1) == building) continue;
        for (int z = 1; z <= hgt; ++z) map.at(i, j, z) = building;
        covered += 1;
      }
    }
  }
  return map;
}

std::vector<std::vector<Vec2>> recipe_centerlines(const WorldSpec& spec) {
  spec.validate();
  const double h = spec.extent / 2;
  std::vector<std::vector<Vec2>> out;
  switch (spec.recipe) {
    case Recipe::straight:
      out.push_back({{-h, 0}, {h, 0}});
      break;
    case Recipe::plus:
      out.push_back({{-h, 0}, {h, 0}});
      out.push_back({{0, -h}, {0, h}});
      break;
    case Recipe::grid:
      for (int r = 1; r < spec.grid_rows; ++r) {
        const double y = -h + r * spec.extent / spec.grid_rows;
        out.push_back({{-h, y}, {h, y}});
      }
      for (int c = 1; c < spec.grid_cols; ++c) {
        const double x = -h + c * spec.extent / spec.grid_cols;
        out.push_back({{x, -h}, {x, h}});
      }
      break;
    case Recipe::curve: {
      const double R = spec.curve_radius, q = R / 2;
      std::vector<Vec2> line{{-h, -q}};
      constexpr int kArc = 64;
      for (int k = 0; k <= kArc; ++k) {
        const double a = -M_PI / 2 + (M_PI / 2) * k / kArc;
        line.emplace_back(-q + R * std::cos(a), q + R * std::sin(a));
      }
      line.emplace_back(q, h);
      out.push_back(std::move(line));
      break;
    }
  }
  return out;
}

Trajectory polyline_trajectory(const std::vector<Vec2>& path, int count, double dt) {
  if (path.size() < 2 || count < 1 || !(dt > 0)) throw InvalidInput("polyline_trajectory: bad arguments");
  std::vector<double> cum(path.size(), 0.0);
  for (std::size_t k = 1; k < path.size(); ++k) cum[k] = cum[k - 1] + (path[k] - path[k - 1]).norm();
  const double L = cum.back();
  Trajectory traj;
  std::size_t seg = 1;
  for (int k = 0; k < count; ++k) {
    const double s = count == 1 ? 0.0 : L * k / (count - 1);
    while (seg + 1 < path.size() && cum[seg] < s) ++seg;
    const double span = cum[seg] - cum[seg - 1];
    const double f = span > 0 ? std::clamp((s - cum[seg - 1]) / span, 0.0, 1.0) : 0.0;
    const Vec2 p = path[seg - 1] + f * (path[seg] - path[seg - 1]);
    const Vec2 t = path[seg] - path[seg - 1];
    traj.samples.push_back({k * dt, Pose2(p.x(), p.y(), std::atan2(t.y(), t.x()))});
  }
  return traj;
}

std::vector<OccupancyGrid> sample_frames(const GlobalMap& world, const Trajectory& trajectory, GridDims crop_dims,
                                         double noise, std::uint64_t seed) {
  if (!(noise >= 0 && noise <= 1)) throw InvalidInput("noise probability must be in [0, 1]");
  const auto [lo, hi] = world.world_bounds();
  const auto ids = world.table().ids();
  Rng rng(derive_seed(seed, "frame-noise"));
  std::vector<OccupancyGrid> frames;
  frames.reserve(trajectory.samples.size());
  for (const auto& s : trajectory.samples) {
    const Pose2& pose = s.pose;
    OccupancyGrid f;
    if (pose.x < lo.x() || pose.y < lo.y() || pose.x > hi.x() || pose.y > hi.y()) {
      spdlog::warn("sample_frames: pose ({:.2f}, {:.2f}) outside the world; frame left unassigned", pose.x, pose.y);
      f = OccupancyGrid(crop_dims, world.voxel_size(), pose, world.table());
    } else {
      f = crop(world, pose, crop_dims);
    }
    f.set_origin(Pose2::identity());
    if (noise > 0 && ids.size() > 1) {
      for (Label& l : f.labels()) {
        if (!rng.bernoulli(noise)) continue;
        const auto it = std::find(ids.begin(), ids.end(), l);
        if (it == ids.end()) {
          l = ids[rng.index(ids.size())];
          continue;
        }
        // uniform over the other labels
        auto r = static_cast<std::size_t>(rng.index(ids.size() - 1));
        if (r >= static_cast<std::size_t>(it - ids.begin())) ++r;
        l = ids[r];
      }
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

}  // namespace occsim
