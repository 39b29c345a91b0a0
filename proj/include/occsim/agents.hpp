#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include "occsim/lane_graph.hpp"
#include "occsim/lanes.hpp"
#include "occsim/occupancy.hpp"
#include "occsim/rng.hpp"

namespace occsim {

enum class AgentState { stationary, moving };

struct LayoutEntry {
  Vec2 position;  ///< metres in the layout (crop) frame
  AgentState state = AgentState::moving;
};

struct AgentLayout {
  std::vector<LayoutEntry> entries;
};

/// Signed density plane over a crop: static vehicles add +1-peak kernels,
/// dynamic ones -1-peak kernels. Same cell convention as occupancy grids.
struct LayoutHeatmap {
  int width = 200;
  int height = 200;
  double meters_per_cell = kDefaultVoxelSize;
  std::vector<float> values;

  LayoutHeatmap() = default;
  LayoutHeatmap(int w, int h, double mpc);

  float at(int i, int j) const { return values[static_cast<std::size_t>(i) * height + j]; }
  float& at(int i, int j) { return values[static_cast<std::size_t>(i) * height + j]; }
  bool in_bounds(int i, int j) const { return i >= 0 && j >= 0 && i < width && j < height; }
  Vec2 cell_center(int i, int j) const;
  std::optional<std::pair<int, int>> cell_of(const Vec2& p) const;
};

inline constexpr int kKernelRadius = 3;
inline constexpr double kKernelSigma = 1.0;
inline constexpr std::size_t kMaxLayoutVehicles = 10;

LayoutHeatmap encode_heatmap(const AgentLayout& layout, int width = 200, int height = 200,
                             double meters_per_cell = kDefaultVoxelSize);
AgentLayout decode_heatmap(const LayoutHeatmap& h, double peak_threshold = 0.5);

void write_heatmap(const LayoutHeatmap& h, const std::filesystem::path& path);
LayoutHeatmap read_heatmap(const std::filesystem::path& path);

enum class GridTransform { identity, rot90, rot180, rot270, flip_x, flip_y };

struct AugmentOptions {
  bool cap = true;
  bool perturb = true;
  /// Draws uniformly from the admissible set when unset.
  std::optional<GridTransform> transform;
};

struct AugmentResult {
  AgentLayout layout;
  OccupancyGrid grid;
  GridTransform transform = GridTransform::identity;
};

/// Cell permutation of a transform: source (i, j) -> destination.
std::pair<int, int> transform_cell(GridTransform t, int i, int j, int width, int height);

OccupancyGrid transform_grid(const OccupancyGrid& grid, GridTransform t);

/// Paired layout/grid augmentation. The layout must use the grid's cell size
/// and footprint.
AugmentResult augment(const AgentLayout& layout, const OccupancyGrid& grid, std::uint64_t seed,
                      const AugmentOptions& options = {});

struct AgentAsset {
  double length = 4.5;
  double width = 1.9;
  double height = 1.6;
  Label label = 0;
};

std::vector<AgentAsset> default_assets(const SemanticTable& table);

struct Agent {
  int id = -1;
  Vec2 position = Vec2::Zero();
  Vec2 heading = Vec2::UnitX();
  double speed = 0.0;
  double desired_speed = 0.0;
  /// Waypoints; the agent sits between route[next - 1] and route[next].
  std::vector<Vec2> route;
  std::size_t next = 1;
  Vec2 target = Vec2::Zero();
  int asset_id = 0;
  bool is_static = false;
  bool is_ego = false;
  int cooldown = 0;

  bool route_done() const { return next >= route.size(); }
  /// Remaining route including the current position.
  std::vector<Vec2> remaining_route() const;
};

/// Everything spawning and simulation read from the static world.
struct Scene {
  GlobalMap map;
  std::vector<Lane> lanes;
  LaneGraph graph;
  std::vector<Vec2> endpoints;  ///< valid route targets (world metres)
  std::vector<AgentAsset> assets;
};

/// Unit tangent of the lane through a lane-graph node.
Vec2 node_tangent(const Scene& scene, int node);

struct SpeedDist {
  double mean = 8.0;
  double stddev = 2.0;
};

/// Produces a layout for the crop around an anchor.
class LayoutSource {
 public:
  virtual ~LayoutSource() = default;
  virtual AgentLayout sample(const OccupancyGrid& local, const Pose2& anchor, const Scene& scene,
                             Rng& rng) = 0;
};

/// Replays a decoded heatmap (e.g. one produced by an external generator).
class HeatmapLayoutSource : public LayoutSource {
 public:
  explicit HeatmapLayoutSource(LayoutHeatmap heatmap, double peak_threshold = 0.5);
  AgentLayout sample(const OccupancyGrid& local, const Pose2& anchor, const Scene& scene,
                     Rng& rng) override;

 private:
  AgentLayout layout_;
};

/// k ~ U{0..max_vehicles} vehicles at random lane samples inside the crop.
class ProceduralLayoutSource : public LayoutSource {
 public:
  int max_vehicles = 10;
  double min_spacing = 8.0;
  double p_static = 0.2;

  AgentLayout sample(const OccupancyGrid& local, const Pose2& anchor, const Scene& scene,
                     Rng& rng) override;
};

struct SpawnParams {
  double snap_radius = 5.0;
  double min_spacing = 8.0;  ///< against agents already in the world
  SpeedDist speed;
  /// A spawn is rejected when it closes on (or is closed on by) another agent
  /// with less bumper gap than s0 + dv*reaction + dv^2/(2*brake).
  double conflict_s0 = 2.0;
  double conflict_reaction = 0.5;
  double conflict_brake = 6.0;
  double d_lat = 2.0;
  GridDims crop_dims = kDefaultCropDims;
};

/// Spawns around `anchor`. With `with_ego` the anchor itself becomes the ego
/// agent (first in the result). Ids are assigned from `first_id`.
std::vector<Agent> spawn_agents(const Pose2& anchor, bool with_ego, const Scene& scene,
                                LayoutSource& source, std::uint64_t seed,
                                const std::vector<Agent>& existing = {},
                                const SpawnParams& params = {}, int first_id = 0);

}  // namespace occsim
