#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "occsim/agents.hpp"
#include "occsim/fusion.hpp"
#include "occsim/lanes.hpp"
#include "occsim/simulation.hpp"
#include "occsim/synthworld.hpp"
#include "occsim/topology.hpp"

namespace occsim {

/// A pipeline stage failed; `stage` names it.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& cause)
      : std::runtime_error(stage + ": " + cause), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "occsim_out";
  WorldSpec world;
  int frames = 60;        ///< frames sampled along the chosen centreline
  double noise = 0.0;     ///< label-flip probability per voxel
  int centerline = 0;     ///< which recipe centreline the ego drives
  std::optional<std::filesystem::path> trajectory;  ///< overrides the centreline trajectory
  GridDims crop_dims = kDefaultCropDims;
  FusionParams fusion;
  TopologyParams topology;
  LaneParams lanes;
  SimParams sim;
  std::string layout = "procedural";  ///< "procedural" or a heatmap file path
};

PipelineConfig pipeline_config_from_json(const nlohmann::json& j);

/// Lowercase hex SHA-256.
std::string sha256_hex(const std::vector<std::uint8_t>& bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Lane graph, route targets and assets for a fused map.
Scene build_scene(GlobalMap map, const RoadGraph& graph, std::vector<Lane> lanes, double link_radius);

/// Recorded ego path used for rolling spawns: the longest lane, as poses.
std::vector<Pose2> lane_pose_path(const std::vector<Lane>& lanes);

/// Recipe centreline `index` clipped so that every crop stays inside the world,
/// sampled into `frames` poses.
Trajectory centerline_trajectory(const WorldSpec& spec, int index, int frames, GridDims crop_dims);

std::unique_ptr<LayoutSource> make_layout_source(const std::string& spec);

/// Writes frames as frame_000000.occg, ... into dir; returns the paths.
std::vector<std::filesystem::path> write_frames(const std::vector<OccupancyGrid>& frames,
                                                const std::filesystem::path& dir);

/// synth -> fuse -> topo -> lanes -> spawn -> simulate. Writes every artifact
/// plus manifest.json (artifact paths and SHA-256 per stage) into out_dir and
/// returns the manifest. Throws StageError on stage failure.
nlohmann::json run_pipeline(const PipelineConfig& config);

}  // namespace occsim
