#include "occsim/fusion.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>

#include <spdlog/spdlog.h>


namespace occsim {

void FusionParams::validate() const {
  if (!(d_max > 0.0)) throw InvalidInput("fusion: d_max must be positive");
  if (tau_vote < 1) throw InvalidInput("fusion: tau_vote must be at least 1");
  if (!(min_area >= 0.0)) throw InvalidInput("fusion: min_area must be non-negative");
  if (neighborhood < 1 || neighborhood % 2 == 0) {
    throw InvalidInput("fusion: neighborhood must be a positive odd window");
  }
}

std::vector<std::size_t> select_keyframes(std::span<const Pose2> poses, double d_max) {
  std::vector<std::size_t> keys;
  if (poses.empty()) return keys;
  keys.push_back(0);
  Vec2 last = poses[0].translation();
  for (std::size_t t = 1; t < poses.size(); ++t) {
    const Vec2 p = poses[t].translation();
    if ((p - last).norm() > d_max) {
      keys.push_back(t);
      last = p;
    }
  }
  return keys;
}

namespace {

GridGeometry frame_geometry(const OccupancyGrid& frame, const Pose2& pose) {
  return {frame.dims().x, frame.dims().y, frame.voxel_size(), pose.compose(frame.origin())};
}

void check_inputs(std::span<const OccupancyGrid> frames, std::span<const Pose2> poses) {
  if (frames.size() != poses.size()) throw InvalidInput("fusion: frame and pose counts differ");
  if (frames.empty()) throw InvalidInput("fusion: no frames");
  for (const auto& f : frames) {
    if (f.voxel_size() != frames[0].voxel_size()) {
      throw InvalidInput("fusion: frames disagree on voxel size");
    }
  }
}

}  // namespace

GridGeometry plan_global_geometry(std::span<const OccupancyGrid> frames,
                                  std::span<const Pose2> poses) {
  check_inputs(frames, poses);
  const double vs = frames[0].voxel_size();
  Vec2 lo(std::numeric_limits<double>::max(), std::numeric_limits<double>::max());
  Vec2 hi = -lo;
  for (std::size_t k = 0; k < frames.size(); ++k) {
    OccupancyGrid placed = frames[k];
    placed.set_origin(poses[k].compose(frames[k].origin()));
    const auto [a, b] = placed.world_bounds();
    lo = lo.cwiseMin(a);
    hi = hi.cwiseMax(b);
  }
  // Snap outward to the world lattice; the tiny slack absorbs rounding in
  // footprints that already sit on lattice lines.
  const long ix0 = static_cast<long>(std::floor(lo.x() / vs + 1e-9));
  const long iy0 = static_cast<long>(std::floor(lo.y() / vs + 1e-9));
  const long ix1 = static_cast<long>(std::ceil(hi.x() / vs - 1e-9));
  const long iy1 = static_cast<long>(std::ceil(hi.y() / vs - 1e-9));
  GridGeometry g;
  g.nx = static_cast<int>(ix1 - ix0);
  g.ny = static_cast<int>(iy1 - iy0);
  g.voxel_size = vs;
  g.origin = Pose2(0.5 * static_cast<double>(ix0 + ix1) * vs, 0.5 * static_cast<double>(iy0 + iy1) * vs, 0.0);
  return g;
}

void sink_columns(GlobalMap& map) {
  const auto& table = map.table();
  const int Z = map.dims().z;
  const Label none = table.unassigned();
  for (int x = 0; x < map.dims().x; ++x) {
    for (int y = 0; y < map.dims().y; ++y) {
      int dz = -1;
      for (int z = 0; z < Z; ++z) {
        if (table.is_ground(map.at(x, y, z))) {
          dz = z;
          break;
        }
      }
      if (dz <= 0) continue;
      for (int z = 0; z < Z; ++z) map.at(x, y, z) = z + dz < Z ? map.at(x, y, z + dz) : none;
    }
  }
}

void mode_fill_ground(GlobalMap& map, int window) {
  const Label none = map.table().unassigned();
  const int X = map.dims().x, Y = map.dims().y, r = window / 2;
  std::vector<Label> ground(static_cast<std::size_t>(X) * Y);
  for (int x = 0; x < X; ++x)
    for (int y = 0; y < Y; ++y) ground[static_cast<std::size_t>(x) * Y + y] = map.at(x, y, 0);

  std::array<int, 256> counts{};
  for (int x = 0; x < X; ++x) {
    for (int y = 0; y < Y; ++y) {
      if (ground[static_cast<std::size_t>(x) * Y + y] != none) continue;
      counts.fill(0);
      bool any = false;
      for (int dx = -r; dx <= r; ++dx) {
        for (int dy = -r; dy <= r; ++dy) {
          const int nx = x + dx, ny = y + dy;
          if ((dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= X || ny >= Y) continue;
          const Label l = ground[static_cast<std::size_t>(nx) * Y + ny];
          if (l == none) continue;
          ++counts[l];
          any = true;
        }
      }
      if (!any) continue;
      int best = -1;
      for (int l = 0; l < 256; ++l) {
        if (counts[l] > 0 && (best < 0 || counts[l] > counts[best])) best = l;
      }
      map.at(x, y, 0) = static_cast<Label>(best);
    }
  }
}

GlobalMap fuse_keyframes(std::span<const OccupancyGrid> frames, std::span<const Pose2> poses,
                         std::span<const std::size_t> keys, const SemanticTable& table,
                         int neighborhood) {
  check_inputs(frames, poses);
  if (keys.empty()) throw InvalidInput("fuse_keyframes: empty keyframe set");
  for (auto k : keys) {
    if (k >= frames.size()) throw InvalidInput("fuse_keyframes: keyframe index out of range");
  }
  const GridGeometry geom = plan_global_geometry(frames, poses);
  int Z = 0;
  for (const auto& f : frames) Z = std::max(Z, f.dims().z);
  GlobalMap map({geom.nx, geom.ny, Z}, geom.voxel_size, geom.origin, table);
  const Label none = table.unassigned();

  for (auto k : keys) {
    const OccupancyGrid& frame = frames[k];
    const int zf = std::min(Z, frame.dims().z);
    for_each_mapped_column(geom, frame_geometry(frame, poses[k]), true,
                           [&](int i, int j, int si, int sj) {
                             for (int z = 0; z < zf; ++z) {
                               Label& dst = map.at(i, j, z);
                               if (dst == none) dst = frame.at(si, sj, z);
                             }
                           });
  }
  sink_columns(map);
  mode_fill_ground(map, neighborhood);
  return map;
}

GlobalMap vote_inpaint(const GlobalMap& map, std::span<const OccupancyGrid> frames,
                       std::span<const Pose2> poses, std::span<const std::size_t> non_keys,
                       int tau_vote) {
  check_inputs(frames, poses);
  const auto& table = map.table();
  const Label none = table.unassigned();
  const std::vector<Label> ids = table.ids();
  std::array<int, 256> dense{};
  dense.fill(-1);
  for (std::size_t c = 0; c < ids.size(); ++c) dense[ids[c]] = static_cast<int>(c);
  const std::size_t C = ids.size();

  // Vote storage is allocated only for voxels that receive a vote.
  std::vector<std::int32_t> slot(map.labels().size(), -1);
  std::vector<std::uint32_t> votes;
  const GridGeometry geom = map.geometry();
  const int Z = map.dims().z;

  for (auto t : non_keys) {
    if (t >= frames.size()) throw InvalidInput("vote_inpaint: frame index out of range");
    const OccupancyGrid& frame = frames[t];
    const int zf = std::min(Z, frame.dims().z);
    for_each_mapped_column(geom, frame_geometry(frame, poses[t]), true,
                           [&](int i, int j, int si, int sj) {
                             for (int z = 0; z < zf; ++z) {
                               const std::size_t v = map.index(i, j, z);
                               if (map.labels()[v] != none) continue;
                               const int c = dense[frame.at(si, sj, z)];
                               if (c < 0) continue;
                               if (slot[v] < 0) {
                                 slot[v] = static_cast<std::int32_t>(votes.size() / C);
                                 votes.resize(votes.size() + C, 0);
                               }
                               ++votes[static_cast<std::size_t>(slot[v]) * C + c];
                             }
                           });
  }

  GlobalMap out = map;
  for (std::size_t v = 0; v < slot.size(); ++v) {
    if (slot[v] < 0) continue;
    const std::uint32_t* row = votes.data() + static_cast<std::size_t>(slot[v]) * C;
    std::size_t best = 0;
    for (std::size_t c = 1; c < C; ++c) {
      if (row[c] > row[best]) best = c;
    }
    if (row[best] >= static_cast<std::uint32_t>(tau_vote)) out.labels()[v] = ids[best];
  }
  return out;
}

Mask2D dilate3(const Mask2D& m) {
  Mask2D out(m.width, m.height);
  for (int i = 0; i < m.width; ++i) {
    for (int j = 0; j < m.height; ++j) {
      std::uint8_t v = 0;
      for (int di = -1; di <= 1 && !v; ++di)
        for (int dj = -1; dj <= 1 && !v; ++dj)
          if (m.in_bounds(i + di, j + dj) && m.at(i + di, j + dj)) v = 1;
      out.at(i, j) = v;
    }
  }
  return out;
}

Mask2D erode3(const Mask2D& m) {
  Mask2D out(m.width, m.height);
  for (int i = 0; i < m.width; ++i) {
    for (int j = 0; j < m.height; ++j) {
      std::uint8_t v = 1;
      for (int di = -1; di <= 1 && v; ++di)
        for (int dj = -1; dj <= 1 && v; ++dj)
          if (m.in_bounds(i + di, j + dj) && !m.at(i + di, j + dj)) v = 0;
      out.at(i, j) = v;
    }
  }
  return out;
}

Mask2D close3(const Mask2D& m) { return erode3(dilate3(m)); }

std::pair<std::vector<int>, std::vector<std::size_t>> label_components(const Mask2D& m) {
  std::vector<int> comp(m.bits.size(), -1);
  std::vector<std::size_t> sizes;
  std::deque<std::pair<int, int>> queue;
  for (int i = 0; i < m.width; ++i) {
    for (int j = 0; j < m.height; ++j) {
      const std::size_t idx = static_cast<std::size_t>(i) * m.height + j;
      if (!m.bits[idx] || comp[idx] >= 0) continue;
      const int id = static_cast<int>(sizes.size());
      sizes.push_back(0);
      comp[idx] = id;
      queue.emplace_back(i, j);
      while (!queue.empty()) {
        auto [ci, cj] = queue.front();
        queue.pop_front();
        ++sizes.back();
        for (int di = -1; di <= 1; ++di) {
          for (int dj = -1; dj <= 1; ++dj) {
            const int ni = ci + di, nj = cj + dj;
            if (!m.in_bounds(ni, nj)) continue;
            const std::size_t n = static_cast<std::size_t>(ni) * m.height + nj;
            if (m.bits[n] && comp[n] < 0) {
              comp[n] = id;
              queue.emplace_back(ni, nj);
            }
          }
        }
      }
    }
  }
  return {std::move(comp), std::move(sizes)};
}

GlobalMap refine_morphology(const GlobalMap& map, const FusionParams& params) {
  GlobalMap out = map;
  const auto& table = map.table();
  const Label road = table.road(), sidewalk = table.sidewalk(), none = table.unassigned();
  const int X = map.dims().x, Y = map.dims().y;

  Mask2D walk(X, Y);
  for (int x = 0; x < X; ++x)
    for (int y = 0; y < Y; ++y) walk.at(x, y) = map.at(x, y, 0) == sidewalk;
  const Mask2D closed = close3(walk);
  for (int x = 0; x < X; ++x) {
    for (int y = 0; y < Y; ++y) {
      if (closed.at(x, y) && !walk.at(x, y) && out.at(x, y, 0) != road) out.at(x, y, 0) = sidewalk;
    }
  }

  Mask2D roadmask(X, Y);
  for (int x = 0; x < X; ++x)
    for (int y = 0; y < Y; ++y) roadmask.at(x, y) = out.at(x, y, 0) == road;
  const auto [comp, sizes] = label_components(roadmask);
  const double cell_area = map.voxel_size() * map.voxel_size();
  std::vector<char> small(sizes.size(), 0);
  std::size_t removed = 0;
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    if (static_cast<double>(sizes[c]) * cell_area < params.min_area) {
      small[c] = 1;
      ++removed;
    }
  }
  if (removed == 0) return out;

  // A removed component takes the most common non-road label on its rim.
  std::vector<std::array<int, 256>> rim(sizes.size());
  for (int x = 0; x < X; ++x) {
    for (int y = 0; y < Y; ++y) {
      const int c = comp[static_cast<std::size_t>(x) * Y + y];
      if (c < 0 || !small[static_cast<std::size_t>(c)]) continue;
      for (int dx = -1; dx <= 1; ++dx) {
        for (int dy = -1; dy <= 1; ++dy) {
          if (!out.in_bounds(x + dx, y + dy)) continue;
          const Label l = out.at(x + dx, y + dy, 0);
          if (l != road && l != none) ++rim[static_cast<std::size_t>(c)][l];
        }
      }
    }
  }
  std::vector<Label> replacement(sizes.size(), none);
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    if (!small[c]) continue;
    int best = -1;
    for (int l = 0; l < 256; ++l) {
      if (rim[c][l] > 0 && (best < 0 || rim[c][l] > rim[c][best])) best = l;
    }
    if (best >= 0) replacement[c] = static_cast<Label>(best);
  }
  for (int x = 0; x < X; ++x) {
    for (int y = 0; y < Y; ++y) {
      const int c = comp[static_cast<std::size_t>(x) * Y + y];
      if (c >= 0 && small[static_cast<std::size_t>(c)]) out.at(x, y, 0) = replacement[static_cast<std::size_t>(c)];
    }
  }
  spdlog::debug("refine_morphology: removed {} road components below {} m^2", removed, params.min_area);
  return out;
}

FusionResult fuse(std::span<const OccupancyGrid> frames, std::span<const Pose2> poses,
                  const SemanticTable& table, const FusionParams& params) {
  params.validate();
  check_inputs(frames, poses);
  FusionResult result;
  result.keyframes = select_keyframes(poses, params.d_max);
  std::vector<std::size_t> others;
  {
    std::vector<char> is_key(frames.size(), 0);
    for (auto k : result.keyframes) is_key[k] = 1;
    for (std::size_t t = 0; t < frames.size(); ++t)
      if (!is_key[t]) others.push_back(t);
  }
  spdlog::info("fusion: {} frames, {} keyframes", frames.size(), result.keyframes.size());
  GlobalMap map = fuse_keyframes(frames, poses, result.keyframes, table, params.neighborhood);
  map = vote_inpaint(map, frames, poses, others, params.tau_vote);
  result.map = refine_morphology(map, params);
  return result;
}

Mask2D frame_coverage(const GridGeometry& geometry, std::span<const OccupancyGrid> frames,
                      std::span<const Pose2> poses, std::span<const std::size_t> indices) {
  Mask2D m(geometry.nx, geometry.ny);
  for (auto k : indices) {
    for_each_mapped_column(geometry, frame_geometry(frames[k], poses[k]), true,
                           [&](int i, int j, int, int) { m.at(i, j) = 1; });
  }
  return m;
}

}  // namespace occsim
