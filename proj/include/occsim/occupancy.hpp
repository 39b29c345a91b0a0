#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "occsim/geometry.hpp"

namespace occsim {

using Label = std::uint8_t;

enum class Role { road, sidewalk, vehicle, ground, obstacle, free, other };

const char* role_name(Role r);
Role parse_role(const std::string& s);

struct SemanticEntry {
  Label id = 0;
  std::string name;
  Role role = Role::other;

  friend bool operator==(const SemanticEntry&, const SemanticEntry&) = default;
};

/// Category table shared by every grid of a run.
class SemanticTable {
 public:
  SemanticTable() = default;
  /// Validates; throws InvalidInput on a malformed table.
  SemanticTable(std::vector<SemanticEntry> entries, Label unassigned_id);

  const std::vector<SemanticEntry>& entries() const { return entries_; }
  Label unassigned() const { return unassigned_; }

  Label road() const { return road_; }
  Label sidewalk() const { return sidewalk_; }
  Label vehicle() const { return vehicle_; }

  bool contains(Label id) const { return lookup_[id] >= 0; }
  std::optional<Role> role_of(Label id) const;
  /// Surface categories a column can rest on: road, sidewalk and ground roles.
  bool is_ground(Label id) const;
  /// Anything solid above the ground layer: not road, sidewalk, free or unassigned.
  bool is_obstacle(Label id) const;
  /// Valid category ids in ascending order.
  std::vector<Label> ids() const;

  /// UniOcc-style unified categories.
  static SemanticTable default_table();
  /// free, road, sidewalk, vehicle, terrain, building; unassigned = 255.
  static SemanticTable minimal();

  friend bool operator==(const SemanticTable& a, const SemanticTable& b) {
    return a.entries_ == b.entries_ && a.unassigned_ == b.unassigned_;
  }

 private:
  std::vector<SemanticEntry> entries_;
  Label unassigned_ = 255;
  Label road_ = 0, sidewalk_ = 0, vehicle_ = 0;
  std::array<int, 256> lookup_{};
};

struct GridDims {
  int x = 0, y = 0, z = 0;
  std::size_t volume() const { return static_cast<std::size_t>(x) * y * z; }
  friend bool operator==(const GridDims&, const GridDims&) = default;
};

/// Planar placement of a grid: cell count, voxel size and world pose of the
/// grid centre (see the convention in geometry.hpp).
struct GridGeometry {
  int nx = 0, ny = 0;
  double voxel_size = 0.4;
  Pose2 origin;

  Vec2 cell_center_world(int i, int j) const;
  /// Continuous corner-based cell coordinate of a world point.
  Vec2 world_to_cell(const Vec2& w) const;
  std::optional<std::pair<int, int>> cell_of(const Vec2& w) const;
};

/// Dense semantic voxel volume, stored x-major then y then z.
class OccupancyGrid {
 public:
  OccupancyGrid() = default;
  OccupancyGrid(GridDims dims, double voxel_size, Pose2 origin, SemanticTable table);
  OccupancyGrid(GridDims dims, double voxel_size, Pose2 origin, SemanticTable table,
                Label fill);

  const GridDims& dims() const { return dims_; }
  double voxel_size() const { return voxel_size_; }
  const Pose2& origin() const { return origin_; }
  void set_origin(const Pose2& p) { origin_ = p; }
  const SemanticTable& table() const { return table_; }
  GridGeometry geometry() const { return {dims_.x, dims_.y, voxel_size_, origin_}; }

  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(x) * dims_.y + y) * dims_.z + z;
  }
  Label at(int x, int y, int z) const { return labels_[index(x, y, z)]; }
  Label& at(int x, int y, int z) { return labels_[index(x, y, z)]; }
  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < dims_.x && y < dims_.y; }

  const std::vector<Label>& labels() const { return labels_; }
  std::vector<Label>& labels() { return labels_; }

  std::size_t count(Label l) const;
  /// Axis-aligned world bounds (min, max) of the grid footprint.
  std::pair<Vec2, Vec2> world_bounds() const;

  friend bool operator==(const OccupancyGrid& a, const OccupancyGrid& b) {
    return a.dims_ == b.dims_ && a.voxel_size_ == b.voxel_size_ && a.origin_.x == b.origin_.x &&
           a.origin_.y == b.origin_.y && a.origin_.yaw == b.origin_.yaw && a.table_ == b.table_ &&
           a.labels_ == b.labels_;
  }

 private:
  GridDims dims_;
  double voxel_size_ = 0.4;
  Pose2 origin_;
  SemanticTable table_;
  std::vector<Label> labels_;
};

/// The fused, world-anchored map. Same storage as a local grid.
using GlobalMap = OccupancyGrid;

inline constexpr GridDims kDefaultCropDims{200, 200, 16};
inline constexpr double kDefaultVoxelSize = 0.4;

/// Calls fn(di, dj, si, sj) for every column of `dst` whose centre falls inside
/// `src`, where (si, sj) is the nearest source column. With `dst_window`
/// the scan is limited to the dst cells covering the src footprint.
template <typename F>
void for_each_mapped_column(const GridGeometry& dst, const GridGeometry& src, bool dst_window,
                            F&& fn);

/// Ego-centred, yaw-aligned crop with nearest-neighbour sampling.
OccupancyGrid crop(const GlobalMap& map, const Pose2& pose, GridDims out_dims = kDefaultCropDims);

/// Foreground wins wherever it is assigned.
OccupancyGrid overlay(const OccupancyGrid& background, const OccupancyGrid& foreground);

/// OCCG v1 binary format.
void write_grid(const OccupancyGrid& grid, const std::filesystem::path& path);
OccupancyGrid read_grid(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_grid(const OccupancyGrid& grid);
OccupancyGrid decode_grid(const std::vector<std::uint8_t>& bytes);

SemanticTable read_semantic_table(const std::filesystem::path& path);

// ---------------------------------------------------------------------------

template <typename F>
void for_each_mapped_column(const GridGeometry& dst, const GridGeometry& src, bool dst_window,
                            F&& fn) {
  int i0 = 0, i1 = dst.nx - 1, j0 = 0, j1 = dst.ny - 1;
  if (dst_window) {
    const double hx = src.nx * 0.5 * src.voxel_size, hy = src.ny * 0.5 * src.voxel_size;
    double lo_x = 1e300, lo_y = 1e300, hi_x = -1e300, hi_y = -1e300;
    for (const Vec2& corner : {Vec2(-hx, -hy), Vec2(hx, -hy), Vec2(-hx, hy), Vec2(hx, hy)}) {
      const Vec2 c = dst.world_to_cell(src.origin.apply(corner));
      lo_x = std::min(lo_x, c.x());
      lo_y = std::min(lo_y, c.y());
      hi_x = std::max(hi_x, c.x());
      hi_y = std::max(hi_y, c.y());
    }
    i0 = std::max(i0, static_cast<int>(std::floor(lo_x)) - 1);
    j0 = std::max(j0, static_cast<int>(std::floor(lo_y)) - 1);
    i1 = std::min(i1, static_cast<int>(std::floor(hi_x)) + 1);
    j1 = std::min(j1, static_cast<int>(std::floor(hi_y)) + 1);
  }
  for (int i = i0; i <= i1; ++i) {
    for (int j = j0; j <= j1; ++j) {
      const Vec2 u = src.world_to_cell(dst.cell_center_world(i, j));
      if (!(u.x() >= 0.0 && u.x() < src.nx && u.y() >= 0.0 && u.y() < src.ny)) continue;
      fn(i, j, static_cast<int>(std::floor(u.x())), static_cast<int>(std::floor(u.y())));
    }
  }
}

}  // namespace occsim
