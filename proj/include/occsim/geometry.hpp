#pragma once

// Planar rigid-body algebra and grid resampling.
//
// Grid convention used throughout the project: a W x H grid is centred on its
// frame origin; cell (i, j) has its centre at
//   ((i + 0.5 - W/2) * voxel_size, (j + 0.5 - H/2) * voxel_size)
// in the grid frame. Index i runs along +x, j along +y.

#include <cstdint>
#include <span>
#include <vector>

#include "occsim/common.hpp"

namespace occsim {

/// Wraps an angle into (-pi, pi].
double normalize_angle(double a);

/// Element of SE(2). yaw is kept normalized.
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;

  Pose2() = default;
  Pose2(double x_, double y_, double yaw_) : x(x_), y(y_), yaw(normalize_angle(yaw_)) {}

  static Pose2 identity() { return {}; }

  Vec2 translation() const { return {x, y}; }
  Vec2 heading() const;

  /// this * other: applies `other` in this pose's frame.
  Pose2 compose(const Pose2& other) const;
  Pose2 inverse() const;
  /// Maps a point from this pose's local frame into the parent frame.
  Vec2 apply(const Vec2& p) const;
  /// Maps a parent-frame point into this pose's local frame.
  Vec2 apply_inverse(const Vec2& p) const;

  bool is_identity() const { return x == 0.0 && y == 0.0 && yaw == 0.0; }
};

struct Twist {
  double vx = 0.0;
  double vy = 0.0;
  double omega = 0.0;
};

struct TrajectorySample {
  double t = 0.0;
  Pose2 pose;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  int horizon = 0;

  /// Throws InvalidInput when empty or timestamps are not strictly increasing.
  void validate() const;
  std::vector<Pose2> poses() const;
};

struct Mask2D {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  Mask2D() = default;
  Mask2D(int w, int h, std::uint8_t fill = 0);

  std::uint8_t at(int i, int j) const { return bits[static_cast<std::size_t>(i) * height + j]; }
  std::uint8_t& at(int i, int j) { return bits[static_cast<std::size_t>(i) * height + j]; }
  bool in_bounds(int i, int j) const { return i >= 0 && j >= 0 && i < width && j < height; }
  std::size_t count() const;

  friend bool operator==(const Mask2D&, const Mask2D&) = default;
};

/// Element-wise AND of two equally sized masks.
Mask2D operator&(const Mask2D& a, const Mask2D& b);

/// Dense multi-channel float plane, x-major then y then channel.
struct FloatGrid {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<float> values;

  FloatGrid() = default;
  FloatGrid(int w, int h, int c, float fill = 0.0f);

  float at(int i, int j, int c = 0) const { return values[index(i, j, c)]; }
  float& at(int i, int j, int c = 0) { return values[index(i, j, c)]; }
  std::size_t index(int i, int j, int c) const {
    return (static_cast<std::size_t>(i) * height + j) * channels + c;
  }

  friend bool operator==(const FloatGrid&, const FloatGrid&) = default;
};

enum class Interp { nearest, bilinear };

/// SE(2) exponential of a constant twist held for dt seconds.
Pose2 exp_twist(const Twist& tw, double dt);

/// Inverse-warps `src` so content at source-frame point p lands at
/// transform.apply(p) in the destination frame. Destinations whose source
/// falls outside the grid take `fill`.
FloatGrid warp_grid(const FloatGrid& src, const Pose2& transform, double voxel_size,
                    Interp mode = Interp::bilinear, float fill = 0.0f);

/// Continuous source index (in cells, corner-based) for destination cell
/// (i, j) under `transform`, with translation already in voxel units.
Vec2 warp_source_index(int i, int j, int width, int height, const Pose2& transform_vox);

/// Converts a metric pose to voxel units (translation divided by voxel_size).
Pose2 to_voxel_units(const Pose2& pose, double voxel_size);

/// 1 where the destination cell originates inside the source field of view.
Mask2D visibility_mask(const Pose2& transform, int width, int height, double voxel_size);

/// Each cell is 1 with probability 1 - p. Deterministic in (dims, p, seed).
Mask2D random_mask(int width, int height, double p, std::uint64_t seed);

/// Integer cells of the Bresenham line between two cells, inclusive.
std::vector<std::pair<int, int>> bresenham(int x0, int y0, int x1, int y1);

/// Rasterizes the polyline through the in-bounds waypoints (grid-frame metres).
Mask2D rasterize_trajectory(std::span<const Vec2> waypoints, int width, int height,
                            double voxel_size);

}  // namespace occsim
