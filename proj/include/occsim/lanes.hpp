#pragma once

#include <span>
#include <vector>

#include "occsim/geometry.hpp"
#include "occsim/occupancy.hpp"
#include "occsim/topology.hpp"

namespace occsim {

struct Lane {
  int id = 0;
  std::vector<Vec2> points;  ///< world metres, resampled at ds_step
  int source_segment = -1;
  int offset_index = 0;      ///< signed offset from the centreline in half-lane units

  double length() const;
};

struct LaneParams {
  double w_lane = 3.6;
  double epsilon = 0.9;  ///< conflict distance between distinct lanes
  double ds_step = 0.5;
  int min_segment_pts = 10;
  int min_lane_pts = 5;

  void validate() const;
};

/// Binary drivable surface placed in the world.
struct DrivableMask {
  Mask2D mask;
  GridGeometry geometry;

  bool contains(const Vec2& world) const;
};

DrivableMask drivable_mask(const GlobalMap& map);

/// Cubic least-squares B-spline through `path` (endpoints clamped),
/// resampled at uniform arc length close to ds_step.
std::vector<Vec2> fit_centerline(std::span<const Vec2> path, double ds_step);

/// Resamples a polyline at uniform arc length (round(L / ds) intervals).
std::vector<Vec2> resample_polyline(std::span<const Vec2> poly, double ds_step);

/// Unit normals (left of travel) from central differences.
std::vector<Vec2> polyline_normals(std::span<const Vec2> pts);

/// Euclidean distance (metres) from each drivable cell to the nearest
/// non-drivable cell centre. Cells beyond the image count as drivable.
std::vector<double> distance_transform(const DrivableMask& m);

/// Twice the median distance-transform value sampled along the centreline.
double estimate_segment_width(std::span<const Vec2> center, const DrivableMask& m,
                              const std::vector<double>& dt);

/// Parallel offsets of the centreline; candidates leaving the drivable mask
/// are dropped. Falls back to the centreline when fewer than one lane fits.
std::vector<Lane> offset_lanes(std::span<const Vec2> center, double seg_width,
                               const LaneParams& params, const DrivableMask& drivable,
                               int source_segment = -1);

/// Cuts every lane at samples within epsilon of any other lane, keeps the
/// longest surviving run, re-fits it, and drops lanes under min_lane_pts.
std::vector<Lane> resolve_overlaps(const std::vector<Lane>& candidates, const LaneParams& params);

/// Whole lane extraction from a cleaned road graph.
std::vector<Lane> extract_lanes(const RoadGraph& graph, const GlobalMap& map,
                                const LaneParams& params = {});

/// Distance from p to the polyline.
double point_polyline_distance(const Vec2& p, std::span<const Vec2> poly);
double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b);

}  // namespace occsim
