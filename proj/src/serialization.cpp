#include "occsim/serialization.hpp"

#include "occsim/agents.hpp"
#include "occsim/fusion.hpp"
#include "occsim/lanes.hpp"
#include "occsim/simulation.hpp"
#include "occsim/synthworld.hpp"
#include "occsim/topology.hpp"

#include <fstream>
#include <map>
#include <iterator>

namespace occsim {

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file for reading", path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open file for writing", path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed", path.string());
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open file for reading", path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("invalid JSON in " + path.string() + ": " + e.what(), e.byte);
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open file for writing", path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed", path.string());
}

void to_json(nlohmann::json& j, const Pose2& p) { j = {{"x", p.x}, {"y", p.y}, {"yaw", p.yaw}}; }

void from_json(const nlohmann::json& j, Pose2& p) {
  p = Pose2(j.at("x").get<double>(), j.at("y").get<double>(), j.value("yaw", 0.0));
}

void to_json(nlohmann::json& j, const SemanticTable& t) {
  j = nlohmann::json::object();
  auto& arr = j["entries"] = nlohmann::json::array();
  for (const auto& e : t.entries()) {
    arr.push_back({{"id", e.id}, {"name", e.name}, {"role", role_name(e.role)}});
  }
  j["unassigned_id"] = t.unassigned();
}

void from_json(const nlohmann::json& j, SemanticTable& t) {
  std::vector<SemanticEntry> entries;
  for (const auto& e : j.at("entries")) {
    const int id = e.at("id").get<int>();
    if (id < 0 || id > 255) throw InvalidInput("semantic id out of byte range");
    entries.push_back({static_cast<Label>(id), e.at("name").get<std::string>(),
                       parse_role(e.at("role").get<std::string>())});
  }
  const int un = j.value("unassigned_id", 255);
  if (un < 0 || un > 255) throw InvalidInput("unassigned id out of byte range");
  t = SemanticTable(std::move(entries), static_cast<Label>(un));
}

nlohmann::json trajectory_to_json(const Trajectory& traj) {
  auto arr = nlohmann::json::array();
  for (const auto& s : traj.samples) {
    arr.push_back({{"t", s.t}, {"x", s.pose.x}, {"y", s.pose.y}, {"yaw", s.pose.yaw}});
  }
  return arr;
}

Trajectory trajectory_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw InvalidInput("trajectory JSON must be an array");
  Trajectory traj;
  for (const auto& r : j) {
    traj.samples.push_back({r.at("t").get<double>(),
                            Pose2(r.at("x").get<double>(), r.at("y").get<double>(),
                                  r.value("yaw", 0.0))});
  }
  traj.horizon = static_cast<int>(traj.samples.size()) - 1;
  traj.validate();
  return traj;
}

Trajectory read_trajectory(const std::filesystem::path& path) {
  return trajectory_from_json(read_json(path));
}

void write_trajectory(const Trajectory& traj, const std::filesystem::path& path) {
  write_json(path, trajectory_to_json(traj));
}

}  // namespace occsim

namespace occsim {

namespace {

void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const char* what) {
  if (!j.is_object()) throw InvalidInput(std::string(what) + " must be a JSON object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : allowed) ok = ok || item.key() == k;
    if (!ok) throw InvalidInput(std::string("unknown key '") + item.key() + "' in " + what);
  }
}

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace

void to_json(nlohmann::json& j, const GridDims& d) { j = {d.x, d.y, d.z}; }

void from_json(const nlohmann::json& j, GridDims& d) {
  if (!j.is_array() || j.size() != 3) throw InvalidInput("dims must be [x, y, z]");
  d = {j[0].get<int>(), j[1].get<int>(), j[2].get<int>()};
  if (d.x <= 0 || d.y <= 0 || d.z <= 0) throw InvalidInput("dims must be positive");
}

void to_json(nlohmann::json& j, const FusionParams& p) {
  j = {{"d_max", p.d_max}, {"tau_vote", p.tau_vote}, {"min_area", p.min_area}, {"neighborhood", p.neighborhood}};
}

void from_json(const nlohmann::json& j, FusionParams& p) {
  check_keys(j, {"d_max", "tau_vote", "min_area", "neighborhood"}, "fusion parameters");
  read_opt(j, "d_max", p.d_max);
  read_opt(j, "tau_vote", p.tau_vote);
  read_opt(j, "min_area", p.min_area);
  read_opt(j, "neighborhood", p.neighborhood);
  p.validate();
}

void to_json(nlohmann::json& j, const TopologyParams& p) {
  j = {{"w_lane", p.w_lane},
       {"tau_prune", p.tau_prune},
       {"tau_obs", p.tau_obs},
       {"probe_length", p.probe_length},
       {"probe_width", p.probe_width}};
}

void from_json(const nlohmann::json& j, TopologyParams& p) {
  check_keys(j, {"w_lane", "tau_prune", "tau_obs", "probe_length", "probe_width"}, "topology parameters");
  read_opt(j, "w_lane", p.w_lane);
  read_opt(j, "tau_prune", p.tau_prune);
  read_opt(j, "tau_obs", p.tau_obs);
  read_opt(j, "probe_length", p.probe_length);
  read_opt(j, "probe_width", p.probe_width);
  p.validate();
}

void to_json(nlohmann::json& j, const LaneParams& p) {
  j = {{"w_lane", p.w_lane},
       {"epsilon", p.epsilon},
       {"ds_step", p.ds_step},
       {"min_segment_pts", p.min_segment_pts},
       {"min_lane_pts", p.min_lane_pts}};
}

void from_json(const nlohmann::json& j, LaneParams& p) {
  check_keys(j, {"w_lane", "epsilon", "ds_step", "min_segment_pts", "min_lane_pts"}, "lane parameters");
  read_opt(j, "w_lane", p.w_lane);
  read_opt(j, "epsilon", p.epsilon);
  read_opt(j, "ds_step", p.ds_step);
  read_opt(j, "min_segment_pts", p.min_segment_pts);
  read_opt(j, "min_lane_pts", p.min_lane_pts);
  p.validate();
}

void to_json(nlohmann::json& j, const IdmParams& p) {
  j = {{"v0", p.v0},     {"a_max", p.a_max},         {"b_comfort", p.b_comfort},    {"s0", p.s0},
       {"T_headway", p.T_headway}, {"delta", p.delta}, {"b_emergency", p.b_emergency}};
}

void from_json(const nlohmann::json& j, IdmParams& p) {
  check_keys(j, {"v0", "a_max", "b_comfort", "s0", "T_headway", "delta", "b_emergency"}, "IDM parameters");
  read_opt(j, "v0", p.v0);
  read_opt(j, "a_max", p.a_max);
  read_opt(j, "b_comfort", p.b_comfort);
  read_opt(j, "s0", p.s0);
  read_opt(j, "T_headway", p.T_headway);
  read_opt(j, "delta", p.delta);
  read_opt(j, "b_emergency", p.b_emergency);
  p.validate();
}

void to_json(nlohmann::json& j, const SpeedDist& p) { j = {{"mean", p.mean}, {"stddev", p.stddev}}; }

void from_json(const nlohmann::json& j, SpeedDist& p) {
  check_keys(j, {"mean", "stddev"}, "speed distribution");
  read_opt(j, "mean", p.mean);
  read_opt(j, "stddev", p.stddev);
  if (!(p.stddev >= 0)) throw InvalidInput("speed stddev must be non-negative");
}

void to_json(nlohmann::json& j, const SpawnParams& p) {
  j = {{"snap_radius", p.snap_radius}, {"min_spacing", p.min_spacing}, {"speed", p.speed}, {"crop_dims", p.crop_dims}};
}

void from_json(const nlohmann::json& j, SpawnParams& p) {
  check_keys(j, {"snap_radius", "min_spacing", "speed", "crop_dims"}, "spawn parameters");
  read_opt(j, "snap_radius", p.snap_radius);
  read_opt(j, "min_spacing", p.min_spacing);
  read_opt(j, "speed", p.speed);
  read_opt(j, "crop_dims", p.crop_dims);
  if (!(p.snap_radius > 0 && p.min_spacing >= 0)) throw InvalidInput("invalid spawn distances");
}

void to_json(nlohmann::json& j, const SimParams& p) {
  j = {{"dt", p.dt},         {"horizon", p.horizon}, {"d_roll", p.d_roll},   {"d_pre", p.d_pre},
       {"d_lc", p.d_lc},     {"d_lat", p.d_lat},     {"w_lane", p.w_lane},   {"ds_step", p.ds_step},
       {"lc_cooldown", p.lc_cooldown}, {"fov", p.fov}, {"idm", p.idm},      {"spawn", p.spawn},
       {"seed", p.seed}};
}

void from_json(const nlohmann::json& j, SimParams& p) {
  check_keys(j,
             {"dt", "horizon", "d_roll", "d_pre", "d_lc", "d_lat", "w_lane", "ds_step", "lc_cooldown", "fov", "idm",
              "spawn", "seed"},
             "simulation parameters");
  read_opt(j, "dt", p.dt);
  read_opt(j, "horizon", p.horizon);
  read_opt(j, "d_roll", p.d_roll);
  read_opt(j, "d_pre", p.d_pre);
  read_opt(j, "d_lc", p.d_lc);
  read_opt(j, "d_lat", p.d_lat);
  read_opt(j, "w_lane", p.w_lane);
  read_opt(j, "ds_step", p.ds_step);
  read_opt(j, "lc_cooldown", p.lc_cooldown);
  read_opt(j, "fov", p.fov);
  read_opt(j, "idm", p.idm);
  read_opt(j, "spawn", p.spawn);
  read_opt(j, "seed", p.seed);
  p.validate();
}

void to_json(nlohmann::json& j, const WorldSpec& s) {
  j = {{"seed", s.seed},
       {"extent", s.extent},
       {"recipe", recipe_name(s.recipe)},
       {"road_width", s.road_width},
       {"sidewalk_width", s.sidewalk_width},
       {"curve_radius", s.curve_radius},
       {"grid_rows", s.grid_rows},
       {"grid_cols", s.grid_cols},
       {"obstacle_density", s.obstacle_density},
       {"voxel_size", s.voxel_size},
       {"height", s.height},
       {"semantic_table", s.table}};
}

void from_json(const nlohmann::json& j, WorldSpec& s) {
  check_keys(j,
             {"seed", "extent", "recipe", "road_width", "sidewalk_width", "curve_radius", "grid_rows", "grid_cols",
              "obstacle_density", "voxel_size", "height", "semantic_table"},
             "world spec");
  read_opt(j, "seed", s.seed);
  read_opt(j, "extent", s.extent);
  if (j.contains("recipe")) s.recipe = parse_recipe(j.at("recipe").get<std::string>());
  read_opt(j, "road_width", s.road_width);
  read_opt(j, "sidewalk_width", s.sidewalk_width);
  read_opt(j, "curve_radius", s.curve_radius);
  read_opt(j, "grid_rows", s.grid_rows);
  read_opt(j, "grid_cols", s.grid_cols);
  read_opt(j, "obstacle_density", s.obstacle_density);
  read_opt(j, "voxel_size", s.voxel_size);
  read_opt(j, "height", s.height);
  read_opt(j, "semantic_table", s.table);
  s.validate();
}

nlohmann::json graph_to_json(const RoadGraph& g) {
  nlohmann::json j;
  const auto& geo = g.geometry();
  j["geometry"] = {{"nx", geo.nx}, {"ny", geo.ny}, {"voxel_size", geo.voxel_size}, {"origin", geo.origin}};
  auto& nodes = j["nodes"] = nlohmann::json::array();
  auto& edges = j["edges"] = nlohmann::json::array();
  for (int u : g.nodes()) {
    const Vec2 w = g.world(u);
    nodes.push_back({{"id", u}, {"pixel", g.pixel(u)}, {"world", w}, {"degree", g.degree(u)}});
    for (const auto& [v, wt] : g.neighbors(u))
      if (u < v) edges.push_back({u, v, wt});
  }
  j["valid_endpoints"] = g.valid_endpoints;
  return j;
}

RoadGraph graph_from_json(const nlohmann::json& j) {
  const auto& gj = j.at("geometry");
  GridGeometry geo{gj.at("nx").get<int>(), gj.at("ny").get<int>(), gj.at("voxel_size").get<double>(),
                   gj.at("origin").get<Pose2>()};
  RoadGraph g(geo);
  std::map<int, int> remap;
  for (const auto& n : j.at("nodes")) remap[n.at("id").get<int>()] = g.add_node(n.at("pixel").get<Vec2>());
  auto id = [&](int old) {
    const auto it = remap.find(old);
    if (it == remap.end()) throw InvalidInput("graph edge references unknown node " + std::to_string(old));
    return it->second;
  };
  for (const auto& e : j.at("edges")) g.add_edge(id(e.at(0).get<int>()), id(e.at(1).get<int>()), e.at(2).get<double>());
  for (const auto& v : j.value("valid_endpoints", nlohmann::json::array())) g.valid_endpoints.push_back(id(v.get<int>()));
  return g;
}

nlohmann::json lanes_to_json(const std::vector<Lane>& lanes) {
  auto arr = nlohmann::json::array();
  for (const Lane& l : lanes) {
    arr.push_back({{"id", l.id},
                   {"source_segment", l.source_segment},
                   {"offset_index", l.offset_index},
                   {"length", l.length()},
                   {"points", l.points}});
  }
  return arr;
}

std::vector<Lane> lanes_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw InvalidInput("lanes JSON must be an array");
  std::vector<Lane> out;
  for (const auto& l : j) {
    Lane lane;
    lane.id = l.value("id", static_cast<int>(out.size()));
    lane.source_segment = l.value("source_segment", -1);
    lane.offset_index = l.value("offset_index", 0);
    lane.points = l.at("points").get<std::vector<Vec2>>();
    out.push_back(std::move(lane));
  }
  return out;
}

void to_json(nlohmann::json& j, const Agent& a) {
  j = {{"id", a.id},
       {"position", a.position},
       {"heading", a.heading},
       {"speed", a.speed},
       {"desired_speed", a.desired_speed},
       {"route", a.remaining_route()},
       {"target", a.target},
       {"asset_id", a.asset_id},
       {"static", a.is_static},
       {"ego", a.is_ego}};
}

void from_json(const nlohmann::json& j, Agent& a) {
  a.id = j.at("id").get<int>();
  a.position = j.at("position").get<Vec2>();
  a.heading = j.at("heading").get<Vec2>();
  a.speed = j.at("speed").get<double>();
  a.desired_speed = j.value("desired_speed", a.speed);
  a.route = j.at("route").get<std::vector<Vec2>>();
  a.next = 1;
  a.target = j.at("target").get<Vec2>();
  a.asset_id = j.value("asset_id", 0);
  a.is_static = j.value("static", false);
  a.is_ego = j.value("ego", false);
  if (a.route.empty()) throw InvalidInput("agent route must be non-empty");
}

}  // namespace occsim
