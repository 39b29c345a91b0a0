#pragma once

// JSON bindings for the domain types and small file helpers.

#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "occsim/geometry.hpp"
#include "occsim/occupancy.hpp"

namespace occsim {
struct FusionParams;
struct TopologyParams;
struct LaneParams;
struct Lane;
class RoadGraph;
struct IdmParams;
struct SimParams;
struct SpawnParams;
struct SpeedDist;
struct WorldSpec;
struct Agent;
struct GridDims;
}  // namespace occsim

namespace occsim {

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

void to_json(nlohmann::json& j, const Pose2& p);
void from_json(const nlohmann::json& j, Pose2& p);
void to_json(nlohmann::json& j, const SemanticTable& t);
void from_json(const nlohmann::json& j, SemanticTable& t);

/// Trajectory files: JSON array of {t, x, y, yaw}.
nlohmann::json trajectory_to_json(const Trajectory& traj);
Trajectory trajectory_from_json(const nlohmann::json& j);
Trajectory read_trajectory(const std::filesystem::path& path);
void write_trajectory(const Trajectory& traj, const std::filesystem::path& path);

// Parameter blocks: missing keys keep their defaults, unknown keys are
// rejected with InvalidInput.
void to_json(nlohmann::json& j, const GridDims& d);
void from_json(const nlohmann::json& j, GridDims& d);
void to_json(nlohmann::json& j, const FusionParams& p);
void from_json(const nlohmann::json& j, FusionParams& p);
void to_json(nlohmann::json& j, const TopologyParams& p);
void from_json(const nlohmann::json& j, TopologyParams& p);
void to_json(nlohmann::json& j, const LaneParams& p);
void from_json(const nlohmann::json& j, LaneParams& p);
void to_json(nlohmann::json& j, const IdmParams& p);
void from_json(const nlohmann::json& j, IdmParams& p);
void to_json(nlohmann::json& j, const SpeedDist& p);
void from_json(const nlohmann::json& j, SpeedDist& p);
void to_json(nlohmann::json& j, const SpawnParams& p);
void from_json(const nlohmann::json& j, SpawnParams& p);
void to_json(nlohmann::json& j, const SimParams& p);
void from_json(const nlohmann::json& j, SimParams& p);
void to_json(nlohmann::json& j, const WorldSpec& s);
void from_json(const nlohmann::json& j, WorldSpec& s);

/// Road graph files: geometry, live nodes (cell units), edges, valid endpoints.
nlohmann::json graph_to_json(const RoadGraph& g);
RoadGraph graph_from_json(const nlohmann::json& j);

nlohmann::json lanes_to_json(const std::vector<Lane>& lanes);
std::vector<Lane> lanes_from_json(const nlohmann::json& j);

void to_json(nlohmann::json& j, const Agent& a);
void from_json(const nlohmann::json& j, Agent& a);

}  // namespace occsim

namespace nlohmann {
template <>
struct adl_serializer<occsim::Vec2> {
  static void to_json(json& j, const occsim::Vec2& v) { j = json::array({v.x(), v.y()}); }
  static void from_json(const json& j, occsim::Vec2& v) {
    v = occsim::Vec2(j.at(0).get<double>(), j.at(1).get<double>());
  }
};
}  // namespace nlohmann
