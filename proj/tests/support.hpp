#pragma once

// Shared fixtures and oracles for the test suites and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "occsim/geometry.hpp"
#include "occsim/occupancy.hpp"

namespace occsim::test {

inline constexpr Label kFree = 0, kRoad = 1, kSidewalk = 2, kVehicle = 3, kTerrain = 4, kBuilding = 5;

/// Map whose ground layer is road where `road` is set and terrain elsewhere;
/// everything above z = 0 is free.
inline GlobalMap map_from_mask(const Mask2D& road, double vs = 0.4, int z = 4,
                               Pose2 origin = Pose2::identity()) {
  GlobalMap m({road.width, road.height, z}, vs, origin, SemanticTable::minimal(), kFree);
  for (int i = 0; i < road.width; ++i)
    for (int j = 0; j < road.height; ++j) m.at(i, j, 0) = road.at(i, j) ? kRoad : kTerrain;
  return m;
}

/// Road cells whose world centre satisfies `pred`.
inline Mask2D mask_where(int w, int h, double vs, const std::function<bool(const Vec2&)>& pred) {
  Mask2D m(w, h);
  const GridGeometry g{w, h, vs, Pose2::identity()};
  for (int i = 0; i < w; ++i)
    for (int j = 0; j < h; ++j) m.at(i, j) = pred(g.cell_center_world(i, j)) ? 1 : 0;
  return m;
}

/// Plain RK4 integration of a body-frame constant twist, from the identity.
inline Pose2 rk4_twist(double vx, double vy, double w, double dt, int steps) {
  double x = 0, y = 0, th = 0;
  const double h = dt / steps;
  auto f = [&](double t_th, double out[3]) {
    out[0] = vx * std::cos(t_th) - vy * std::sin(t_th);
    out[1] = vx * std::sin(t_th) + vy * std::cos(t_th);
    out[2] = w;
  };
  for (int k = 0; k < steps; ++k) {
    double k1[3], k2[3], k3[3], k4[3];
    f(th, k1);
    f(th + 0.5 * h * k1[2], k2);
    f(th + 0.5 * h * k2[2], k3);
    f(th + h * k3[2], k4);
    x += h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]);
    y += h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]);
    th += h / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]);
  }
  return {x, y, th};
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("occsim_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

struct Agreement {
  std::size_t observed = 0;
  std::size_t agree = 0;
  double ratio() const { return observed ? static_cast<double>(agree) / observed : 1.0; }
};

/// Voxel agreement between a fused map and the ground-truth world over the
/// columns set in `observed` (fused-map cells). Columns are matched by world
/// position of the fused cell centre.
inline Agreement compare_to_truth(const GlobalMap& fused, const GlobalMap& truth, const Mask2D& observed) {
  Agreement a;
  const GridGeometry fg = fused.geometry(), tg = truth.geometry();
  const int Z = std::min(fused.dims().z, truth.dims().z);
  for (int i = 0; i < fg.nx; ++i) {
    for (int j = 0; j < fg.ny; ++j) {
      if (!observed.at(i, j)) continue;
      const auto c = tg.cell_of(fg.cell_center_world(i, j));
      if (!c) continue;
      for (int z = 0; z < Z; ++z) {
        ++a.observed;
        a.agree += fused.at(i, j, z) == truth.at(c->first, c->second, z);
      }
    }
  }
  return a;
}

}  // namespace occsim::test
