#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include <json.hpp>

#include "occsim/agents.hpp"

namespace occsim {

struct IdmParams {
  double v0 = 10.0;  ///< fallback desired speed for agents without their own
  double a_max = 1.5;
  double b_comfort = 2.0;
  double s0 = 2.0;
  double T_headway = 1.5;
  double delta = 4.0;
  double b_emergency = 6.0;

  void validate() const;
};

struct SimParams {
  double dt = 0.5;
  int horizon = 100;
  double d_roll = 20.0;
  double d_pre = 30.0;
  double d_lc = 30.0;
  double d_lat = 2.0;
  double w_lane = 3.6;
  double ds_step = 0.5;
  int lc_cooldown = 20;
  GridDims fov = kDefaultCropDims;
  IdmParams idm;
  SpawnParams spawn;
  std::uint64_t seed = 0;

  void validate() const;
};

/// IDM acceleration. s = +inf means no leader.
double idm_accel(double v, double v0, double dv, double s, const IdmParams& idm);

/// Static scene plus the recorded ego pose path and the layout source.
struct SimWorld {
  const Scene* scene = nullptr;
  std::vector<Pose2> ego_path;
  LayoutSource* layout = nullptr;
};

struct SimState {
  int t = 0;
  std::vector<Agent> agents;
  Pose2 ego_pose;
  double moved = 0.0;
  int next_id = 0;
  std::uint64_t spawn_calls = 0;

  const Agent* ego() const;
  Agent* ego();
};

struct StepEvents {
  bool rolled = false;
  std::vector<int> spawned;
  std::vector<int> culled;
  std::vector<int> completed;
  std::vector<int> lane_changes;
};

/// Optional per-step ego speed override (external policy hook).
using EgoPolicy = std::function<std::optional<double>(const SimState&, const Agent& ego)>;

/// Closed membership in the yaw-aligned crop footprint around `ego`.
bool in_fov(const Pose2& ego, const Vec2& p, const GridDims& fov, double voxel_size);

/// Index into `others` of the nearest agent inside the forward cone whose
/// distance to a's remaining route is below d_lat.
std::optional<std::size_t> select_leader(const Agent& a, const std::vector<Agent>& others, double d_lat);

/// Centre distance minus both half lengths.
double bumper_gap(const Agent& a, const Agent& b, const std::vector<AgentAsset>& assets);

/// New route through an adjacent lane, or nullopt when no change is made.
std::optional<std::vector<Vec2>> maybe_lane_change(const Agent& a, const Agent& leader, double gap, double dv,
                                                   const Scene& scene, const std::vector<Agent>& others,
                                                   const SimParams& params);

/// Cubic Bezier sampled at ~ds_step arc length, endpoints included.
std::vector<Vec2> bezier(const Vec2& p0, const Vec2& p1, const Vec2& p2, const Vec2& p3, double ds_step);

/// Moves the agent `dist` metres along its route and refreshes its heading.
void advance_along_route(Agent& a, double dist);

/// Initial spawns at the ego start pose and the forward/backward anchors.
SimState initialize(const SimWorld& world, const SimParams& params);

StepEvents rolling_update(SimState& state, const SimWorld& world, const SimParams& params);

/// Leader selection, lane changes, IDM and route advance for every agent.
/// Reads the previous step's states and commits them together.
StepEvents update_agents(SimState& state, const Scene& scene, const SimParams& params,
                         const EgoPolicy& policy = {});

OccupancyGrid render(const SimState& state, const Scene& scene, const SimParams& params);

struct StepResult {
  OccupancyGrid frame;
  StepEvents events;
};

StepResult step(SimState& state, const SimWorld& world, const SimParams& params, const EgoPolicy& policy = {});

/// Oriented footprint overlap test.
bool footprints_overlap(const Agent& a, const AgentAsset& aa, const Agent& b, const AgentAsset& ba);

/// Receives each rendered frame; when set, frames are not kept in RunResult.
using FrameSink = std::function<void(int t, const OccupancyGrid& frame)>;

struct RunResult {
  std::vector<OccupancyGrid> frames;
  nlohmann::json log;  ///< poses and per-step agent states and events
  int frame_count = 0;
  int lane_changes = 0;
  int overlap_violations = 0;
};

RunResult run(const SimWorld& world, const SimParams& params, const EgoPolicy& policy = {},
              const FrameSink& sink = {});

}  // namespace occsim
