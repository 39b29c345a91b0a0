#include "occsim/pipeline.hpp"

#include <cstdio>
#include <functional>

#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include "occsim/serialization.hpp"

namespace occsim {

namespace fs = std::filesystem;

PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
  static const char* const kKeys[] = {"seed",      "out_dir",  "world",    "frames", "noise", "centerline",
                                      "trajectory", "crop_dims", "fusion",  "topology", "lanes", "simulation",
                                      "layout"};
  if (!j.is_object()) throw InvalidInput("pipeline config must be a JSON object");
  for (const auto& item : j.items()) {
    if (std::find(std::begin(kKeys), std::end(kKeys), item.key()) == std::end(kKeys))
      throw InvalidInput("unknown key '" + item.key() + "' in pipeline config");
  }
  PipelineConfig c;
  c.seed = j.value("seed", c.seed);
  if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
  if (j.contains("world")) c.world = j.at("world").get<WorldSpec>();
  c.frames = j.value("frames", c.frames);
  c.noise = j.value("noise", c.noise);
  c.centerline = j.value("centerline", c.centerline);
  if (j.contains("trajectory")) c.trajectory = fs::path(j.at("trajectory").get<std::string>());
  if (j.contains("crop_dims")) c.crop_dims = j.at("crop_dims").get<GridDims>();
  if (j.contains("fusion")) c.fusion = j.at("fusion").get<FusionParams>();
  if (j.contains("topology")) c.topology = j.at("topology").get<TopologyParams>();
  if (j.contains("lanes")) c.lanes = j.at("lanes").get<LaneParams>();
  if (j.contains("simulation")) c.sim = j.at("simulation").get<SimParams>();
  c.layout = j.value("layout", c.layout);
  if (c.frames < 1) throw InvalidInput("frames must be at least 1");
  if (!(c.noise >= 0 && c.noise <= 1)) throw InvalidInput("noise must be in [0, 1]");
  return c;
}

std::string sha256_hex(const std::vector<std::uint8_t>& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 computation failed");
  std::string hex;
  char buf[3];
  for (unsigned int k = 0; k < len; ++k) {
    std::snprintf(buf, sizeof buf, "%02x", md[k]);
    hex += buf;
  }
  return hex;
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_bytes(path)); }

Scene build_scene(GlobalMap map, const RoadGraph& graph, std::vector<Lane> lanes, double link_radius) {
  Scene scene;
  scene.assets = default_assets(map.table());
  scene.map = std::move(map);
  scene.graph = LaneGraph(lanes, link_radius);
  scene.lanes = std::move(lanes);
  for (int v : graph.valid_endpoints) scene.endpoints.push_back(graph.world(v));
  return scene;
}

std::vector<Pose2> lane_pose_path(const std::vector<Lane>& lanes) {
  const Lane* best = nullptr;
  for (const Lane& l : lanes)
    if (!best || l.length() > best->length()) best = &l;
  std::vector<Pose2> out;
  if (!best) return out;
  const auto& p = best->points;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const Vec2 t = p[std::min(k + 1, p.size() - 1)] - p[k > 0 ? k - 1 : 0];
    out.emplace_back(p[k].x(), p[k].y(), std::atan2(t.y(), t.x()));
  }
  return out;
}

Trajectory centerline_trajectory(const WorldSpec& spec, int index, int frames, GridDims crop_dims) {
  const auto lines = recipe_centerlines(spec);
  if (index < 0 || index >= static_cast<int>(lines.size())) throw InvalidInput("centerline index out of range");
  const double h = spec.extent / 2 - 0.5 * std::max(crop_dims.x, crop_dims.y) * spec.voxel_size;
  if (!(h > 0)) throw InvalidInput("world is smaller than one crop");
  std::vector<Vec2> path;
  for (const Vec2& p : lines[static_cast<std::size_t>(index)]) {
    const Vec2 q = p.cwiseMax(Vec2(-h, -h)).cwiseMin(Vec2(h, h));
    if (path.empty() || (q - path.back()).norm() > 1e-9) path.push_back(q);
  }
  if (path.size() < 2) throw InvalidInput("centerline has no extent inside the crop margin");
  return polyline_trajectory(path, frames);
}

std::unique_ptr<LayoutSource> make_layout_source(const std::string& spec) {
  if (spec == "procedural") return std::make_unique<ProceduralLayoutSource>();
  return std::make_unique<HeatmapLayoutSource>(read_heatmap(spec));
}

std::vector<fs::path> write_frames(const std::vector<OccupancyGrid>& frames, const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<fs::path> out;
  char name[32];
  for (std::size_t k = 0; k < frames.size(); ++k) {
    std::snprintf(name, sizeof name, "frame_%06zu.occg", k);
    out.push_back(dir / name);
    write_grid(frames[k], out.back());
  }
  return out;
}

namespace {

class Manifest {
 public:
  Manifest(const fs::path& root, std::uint64_t seed) : root_(root) {
    doc_["seed"] = seed;
    doc_["stages"] = nlohmann::json::array();
  }

  void stage(const std::string& name, const std::vector<fs::path>& files) {
    nlohmann::json s{{"name", name}, {"artifacts", nlohmann::json::array()}};
    for (const auto& f : files) {
      const auto bytes = read_bytes(f);
      s["artifacts"].push_back(
          {{"path", fs::relative(f, root_).generic_string()}, {"bytes", bytes.size()}, {"sha256", sha256_hex(bytes)}});
    }
    doc_["stages"].push_back(std::move(s));
  }

  const nlohmann::json& json() const { return doc_; }

 private:
  fs::path root_;
  nlohmann::json doc_;
};

template <typename F>
auto run_stage(const std::string& name, F&& body) -> decltype(body()) {
  spdlog::info("stage {}: start", name);
  try {
    return body();
  } catch (const IoError&) {
    throw;
  } catch (const FormatError&) {
    throw;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

}  // namespace

nlohmann::json run_pipeline(const PipelineConfig& config) {
  const fs::path out = config.out_dir;
  fs::create_directories(out);
  Manifest manifest(out, config.seed);

  // synth
  WorldSpec spec = config.world;
  spec.seed = derive_seed(config.seed, "synth");
  GlobalMap world;
  Trajectory traj;
  std::vector<OccupancyGrid> frames;
  run_stage("synth", [&] {
    world = generate_world(spec);
    if (config.trajectory) {
      traj = read_trajectory(*config.trajectory);
    } else {
      traj = centerline_trajectory(spec, config.centerline, config.frames, config.crop_dims);
    }
    frames = sample_frames(world, traj, config.crop_dims, config.noise, derive_seed(config.seed, "frames"));
  });
  write_grid(world, out / "world_gt.occg");
  write_trajectory(traj, out / "trajectory.json");
  auto synth_files = write_frames(frames, out / "frames");
  synth_files.insert(synth_files.begin(), {out / "world_gt.occg", out / "trajectory.json"});
  manifest.stage("synth", synth_files);

  // fuse
  const auto poses = traj.poses();
  FusionResult fused = run_stage("fuse", [&] { return fuse(frames, poses, world.table(), config.fusion); });
  write_grid(fused.map, out / "map.occg");
  write_json(out / "keyframes.json", fused.keyframes);
  manifest.stage("fuse", {out / "map.occg", out / "keyframes.json"});

  // topo
  RoadGraph graph = run_stage("topo", [&] { return extract_topology(fused.map, config.topology); });
  write_json(out / "graph.json", graph_to_json(graph));
  manifest.stage("topo", {out / "graph.json"});

  // lanes
  std::vector<Lane> lanes = run_stage("lanes", [&] {
    auto l = extract_lanes(graph, fused.map, config.lanes);
    if (l.empty()) throw InvalidInput("no lanes extracted");
    return l;
  });
  write_json(out / "lanes.json", lanes_to_json(lanes));
  manifest.stage("lanes", {out / "lanes.json"});

  // spawn
  SimParams sim = config.sim;
  sim.w_lane = config.lanes.w_lane;
  sim.seed = derive_seed(config.seed, "simulate");
  const Scene scene = build_scene(fused.map, graph, lanes, 2.0 * config.lanes.w_lane);
  std::unique_ptr<LayoutSource> layout;
  SimWorld sim_world{&scene, lane_pose_path(lanes), nullptr};
  SimState initial = run_stage("spawn", [&] {
    layout = make_layout_source(config.layout);
    sim_world.layout = layout.get();
    return initialize(sim_world, sim);
  });
  write_json(out / "agents.json", initial.agents);
  manifest.stage("spawn", {out / "agents.json"});

  // simulate
  std::vector<fs::path> sim_files;
  const fs::path sim_dir = out / "sim";
  fs::create_directories(sim_dir);
  RunResult result = run_stage("simulate", [&] {
    return run(sim_world, sim, {}, [&](int t, const OccupancyGrid& frame) {
      char name[32];
      std::snprintf(name, sizeof name, "frame_%06d.occg", t);
      sim_files.push_back(sim_dir / name);
      write_grid(frame, sim_files.back());
    });
  });
  write_json(sim_dir / "run.json", result.log);
  sim_files.push_back(sim_dir / "run.json");
  manifest.stage("simulate", sim_files);

  write_json(out / "manifest.json", manifest.json());
  spdlog::info("pipeline complete: {}", (out / "manifest.json").string());
  return manifest.json();
}

}  // namespace occsim
