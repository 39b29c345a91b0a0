#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "occsim/geometry.hpp"
#include "occsim/occupancy.hpp"

namespace occsim {

enum class Recipe { straight, curve, plus, grid };

const char* recipe_name(Recipe r);
Recipe parse_recipe(const std::string& s);

/// Analytic test world. Roads are strips of `road_width` around centrelines;
/// the map is square, centred on the world origin.
struct WorldSpec {
  std::uint64_t seed = 0;
  double extent = 160.0;  ///< side length, metres
  Recipe recipe = Recipe::straight;
  double road_width = 10.8;
  double sidewalk_width = 2.0;
  double curve_radius = 40.0;
  int grid_rows = 2;
  int grid_cols = 2;
  double obstacle_density = 0.05;  ///< target fraction of off-road area under buildings
  double voxel_size = kDefaultVoxelSize;
  int height = 16;
  SemanticTable table = SemanticTable::minimal();

  void validate() const;
};

GlobalMap generate_world(const WorldSpec& spec);

/// Road centrelines of the recipe, in world metres, each ordered along travel.
std::vector<std::vector<Vec2>> recipe_centerlines(const WorldSpec& spec);

/// `count` poses at uniform arc length along a polyline, yaw along the tangent.
Trajectory polyline_trajectory(const std::vector<Vec2>& path, int count, double dt = 0.5);

/// Ego-frame crops (origin = identity) along the trajectory. With noise > 0,
/// each voxel is replaced by a different valid label with that probability.
std::vector<OccupancyGrid> sample_frames(const GlobalMap& world, const Trajectory& trajectory,
                                         GridDims crop_dims = kDefaultCropDims, double noise = 0.0,
                                         std::uint64_t seed = 0);

}  // namespace occsim
