#include "occsim/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "occsim/rng.hpp"

namespace occsim {

double normalize_angle(double a) {
  double r = std::remainder(a, 2.0 * M_PI);
  if (r <= -M_PI) r += 2.0 * M_PI;
  return r;
}

Vec2 Pose2::heading() const { return {std::cos(yaw), std::sin(yaw)}; }

Pose2 Pose2::compose(const Pose2& o) const {
  const double c = std::cos(yaw), s = std::sin(yaw);
  return {x + c * o.x - s * o.y, y + s * o.x + c * o.y, yaw + o.yaw};
}

Pose2 Pose2::inverse() const {
  const double c = std::cos(yaw), s = std::sin(yaw);
  return {-(c * x + s * y), s * x - c * y, -yaw};
}

Vec2 Pose2::apply(const Vec2& p) const {
  const double c = std::cos(yaw), s = std::sin(yaw);
  return {x + c * p.x() - s * p.y(), y + s * p.x() + c * p.y()};
}

Vec2 Pose2::apply_inverse(const Vec2& p) const {
  const double c = std::cos(yaw), s = std::sin(yaw);
  const double dx = p.x() - x, dy = p.y() - y;
  return {c * dx + s * dy, -s * dx + c * dy};
}

void Trajectory::validate() const {
  if (samples.empty()) throw InvalidInput("trajectory must contain at least one sample");
  for (std::size_t k = 1; k < samples.size(); ++k) {
    if (!(samples[k].t > samples[k - 1].t)) {
      throw InvalidInput("trajectory timestamps must be strictly increasing (index " +
                         std::to_string(k) + ")");
    }
  }
}

std::vector<Pose2> Trajectory::poses() const {
  std::vector<Pose2> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.pose);
  return out;
}

Mask2D::Mask2D(int w, int h, std::uint8_t fill)
    : width(w), height(h), bits(static_cast<std::size_t>(w) * h, fill) {}

std::size_t Mask2D::count() const {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](auto b) { return b != 0; }));
}

Mask2D operator&(const Mask2D& a, const Mask2D& b) {
  if (a.width != b.width || a.height != b.height) throw InvalidInput("mask dimension mismatch");
  Mask2D out(a.width, a.height);
  for (std::size_t k = 0; k < a.bits.size(); ++k) out.bits[k] = (a.bits[k] && b.bits[k]) ? 1 : 0;
  return out;
}

FloatGrid::FloatGrid(int w, int h, int c, float fill)
    : width(w), height(h), channels(c), values(static_cast<std::size_t>(w) * h * c, fill) {}

Pose2 exp_twist(const Twist& tw, double dt) {
  if (!std::isfinite(tw.vx) || !std::isfinite(tw.vy) || !std::isfinite(tw.omega) ||
      !std::isfinite(dt)) {
    throw InvalidInput("exp_twist: non-finite twist or dt");
  }
  if (dt < 0.0) throw InvalidInput("exp_twist: dt must be non-negative");
  const double theta = tw.omega * dt;
  const double ux = tw.vx * dt, uy = tw.vy * dt;
  if (std::abs(theta) < 1e-8) return {ux, uy, theta};
  // V = [[sin t, -(1 - cos t)], [1 - cos t, sin t]] / t
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / theta;
  return {a * ux - b * uy, b * ux + a * uy, theta};
}

Pose2 to_voxel_units(const Pose2& pose, double voxel_size) {
  return {pose.x / voxel_size, pose.y / voxel_size, pose.yaw};
}

Vec2 warp_source_index(int i, int j, int width, int height, const Pose2& transform_vox) {
  const Vec2 q(i + 0.5 - width * 0.5, j + 0.5 - height * 0.5);
  const Vec2 p = transform_vox.apply_inverse(q);
  return {p.x() + width * 0.5, p.y() + height * 0.5};
}

namespace {

void check_dims(int w, int h) {
  if (w <= 0 || h <= 0) throw InvalidInput("grid dimensions must be positive");
}

}  // namespace

FloatGrid warp_grid(const FloatGrid& src, const Pose2& transform, double voxel_size, Interp mode,
                    float fill) {
  check_dims(src.width, src.height);
  if (src.channels <= 0) throw InvalidInput("grid must have at least one channel");
  if (!(voxel_size > 0.0)) throw InvalidInput("voxel_size must be positive");
  if (transform.is_identity()) return src;

  const Pose2 tv = to_voxel_units(transform, voxel_size);
  const int W = src.width, H = src.height, C = src.channels;
  FloatGrid dst(W, H, C, fill);
  for (int i = 0; i < W; ++i) {
    for (int j = 0; j < H; ++j) {
      const Vec2 u = warp_source_index(i, j, W, H, tv);
      if (!(u.x() >= 0.0 && u.x() < W && u.y() >= 0.0 && u.y() < H)) continue;
      if (mode == Interp::nearest) {
        const int si = static_cast<int>(std::floor(u.x()));
        const int sj = static_cast<int>(std::floor(u.y()));
        for (int c = 0; c < C; ++c) dst.at(i, j, c) = src.at(si, sj, c);
        continue;
      }
      // Bilinear over cell centres, clamped at the border.
      const double sx = u.x() - 0.5, sy = u.y() - 0.5;
      const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
      const double fx = sx - x0, fy = sy - y0;
      const int xa = std::clamp(x0, 0, W - 1), xb = std::clamp(x0 + 1, 0, W - 1);
      const int ya = std::clamp(y0, 0, H - 1), yb = std::clamp(y0 + 1, 0, H - 1);
      for (int c = 0; c < C; ++c) {
        const double v = (1 - fx) * (1 - fy) * src.at(xa, ya, c) + fx * (1 - fy) * src.at(xb, ya, c) +
                         (1 - fx) * fy * src.at(xa, yb, c) + fx * fy * src.at(xb, yb, c);
        dst.at(i, j, c) = static_cast<float>(v);
      }
    }
  }
  return dst;
}

Mask2D visibility_mask(const Pose2& transform, int width, int height, double voxel_size) {
  check_dims(width, height);
  if (!(voxel_size > 0.0)) throw InvalidInput("voxel_size must be positive");
  Mask2D m(width, height);
  const Pose2 tv = to_voxel_units(transform, voxel_size);
  for (int i = 0; i < width; ++i) {
    for (int j = 0; j < height; ++j) {
      const Vec2 u = warp_source_index(i, j, width, height, tv);
      m.at(i, j) = (u.x() >= 0.0 && u.x() < width && u.y() >= 0.0 && u.y() < height) ? 1 : 0;
    }
  }
  return m;
}

Mask2D random_mask(int width, int height, double p, std::uint64_t seed) {
  check_dims(width, height);
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidInput("random_mask: p must lie in [0, 1]");
  Mask2D m(width, height);
  Rng rng(seed);
  const double keep = 1.0 - p;
  for (auto& b : m.bits) b = rng.uniform() < keep ? 1 : 0;
  return m;
}

std::vector<std::pair<int, int>> bresenham(int x0, int y0, int x1, int y1) {
  std::vector<std::pair<int, int>> cells;
  const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
  const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    cells.emplace_back(x0, y0);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
  return cells;
}

Mask2D rasterize_trajectory(std::span<const Vec2> waypoints, int width, int height,
                            double voxel_size) {
  if (waypoints.empty()) throw InvalidInput("rasterize_trajectory: no waypoints");
  check_dims(width, height);
  if (!(voxel_size > 0.0)) throw InvalidInput("voxel_size must be positive");
  Mask2D m(width, height);
  std::vector<std::pair<int, int>> cells;
  for (const Vec2& w : waypoints) {
    const int i = static_cast<int>(std::floor(w.x() / voxel_size + width * 0.5));
    const int j = static_cast<int>(std::floor(w.y() / voxel_size + height * 0.5));
    if (m.in_bounds(i, j)) cells.emplace_back(i, j);
  }
  if (cells.empty()) return m;
  m.at(cells[0].first, cells[0].second) = 1;
  for (std::size_t k = 1; k < cells.size(); ++k) {
    for (auto [x, y] : bresenham(cells[k - 1].first, cells[k - 1].second, cells[k].first, cells[k].second)) {
      m.at(x, y) = 1;
    }
  }
  return m;
}

}  // namespace occsim
