// occsim command-line front end. Exit codes: 0 ok, 2 config error,
// 3 stage failure, 4 I/O error.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "occsim/metrics.hpp"
#include "occsim/pipeline.hpp"
#include "occsim/serialization.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace occsim;

namespace {

constexpr int kConfigError = 2;
constexpr int kStageError = 3;
constexpr int kIoError = 4;

template <typename T>
T load_params(const std::string& path) {
  if (path.empty()) return T{};
  return read_json(path).get<T>();
}

std::vector<OccupancyGrid> read_frame_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a frame directory", dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".occg") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<OccupancyGrid> frames;
  for (const auto& f : files) frames.push_back(read_grid(f));
  return frames;
}

void emit(const json& j, const std::string& out) {
  if (out.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    write_json(out, j);
  }
}

Scene load_scene(const std::string& map_path, const std::string& graph_path, const std::string& lanes_path,
                 double w_lane) {
  GlobalMap map = read_grid(map_path);
  const RoadGraph graph = graph_from_json(read_json(graph_path));
  auto lanes = lanes_from_json(read_json(lanes_path));
  if (lanes.empty()) throw InvalidInput("lane file contains no lanes: " + lanes_path);
  return build_scene(std::move(map), graph, std::move(lanes), 2.0 * w_lane);
}

Pose2 parse_pose(const std::vector<double>& v) {
  if (v.size() != 3) throw InvalidInput("pose must be x,y,yaw");
  return {v[0], v[1], v[2]};
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("occsim"));

  CLI::App app{"occsim: occupancy map fusion, lane extraction and closed-loop traffic simulation"};
  app.require_subcommand(1);
  std::string log_level = "info";
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out_dir;
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off");
  app.add_option_function<std::uint64_t>("--seed", [&](std::uint64_t s) { seed = s, seed_given = true; }, "Root seed");
  app.add_option("--out-dir", out_dir, "Output directory");
  std::function<void()> action;

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a ground-truth world and ego-centric frames");
  std::string synth_spec, synth_traj, synth_out;
  int synth_frames = 60, synth_centerline = 0;
  double synth_noise = 0.0;
  synth->add_option("--spec", synth_spec, "World spec JSON");
  synth->add_option("--traj", synth_traj, "Trajectory JSON; defaults to a recipe centreline");
  synth->add_option("--frames", synth_frames, "Frames along the centreline");
  synth->add_option("--centerline", synth_centerline, "Centreline index");
  synth->add_option("--noise", synth_noise, "Label-flip probability");
  std::vector<int> synth_crop;
  synth->add_option("--crop", synth_crop, "Frame size in voxels: x y z")->expected(3);
  synth->add_option("--out", synth_out, "Output directory");
  synth->callback([&] {
    action = [&] {
      PipelineConfig c;
      if (!synth_spec.empty()) c.world = read_json(synth_spec).get<WorldSpec>();
      if (seed_given) c.world.seed = seed;
      if (!synth_crop.empty()) c.crop_dims = {synth_crop[0], synth_crop[1], synth_crop[2]};
      const fs::path out = synth_out.empty() ? (out_dir.empty() ? "." : out_dir) : synth_out;
      fs::create_directories(out);
      const GlobalMap world = generate_world(c.world);
      Trajectory traj;
      if (!synth_traj.empty()) {
        traj = read_trajectory(synth_traj);
      } else {
        traj = centerline_trajectory(c.world, synth_centerline, synth_frames, c.crop_dims);
      }
      const auto frames = sample_frames(world, traj, c.crop_dims, synth_noise, c.world.seed);
      write_grid(world, out / "world_gt.occg");
      write_trajectory(traj, out / "trajectory.json");
      write_frames(frames, out / "frames");
      spdlog::info("synth: {} frames written to {}", frames.size(), out.string());
    };
  });

  // fuse
  auto* fuse_cmd = app.add_subcommand("fuse", "Fuse frames into a global map");
  std::string fuse_frames, fuse_traj, fuse_params, fuse_out;
  fuse_cmd->add_option("--frames", fuse_frames, "Directory of frame_*.occg")->required();
  fuse_cmd->add_option("--traj", fuse_traj, "Trajectory JSON with one pose per frame")->required();
  fuse_cmd->add_option("--params", fuse_params, "Fusion parameter JSON");
  fuse_cmd->add_option("--out", fuse_out, "Output map (.occg)")->required();
  fuse_cmd->callback([&] {
    action = [&] {
      const auto params = load_params<FusionParams>(fuse_params);
      const auto frames = read_frame_dir(fuse_frames);
      const auto poses = read_trajectory(fuse_traj).poses();
      if (frames.empty()) throw InvalidInput("no frames in " + fuse_frames);
      const auto res = fuse(frames, poses, frames.front().table(), params);
      write_grid(res.map, fuse_out);
      emit({{"map", fuse_out}, {"keyframes", res.keyframes}}, "");
    };
  });

  // topo
  auto* topo = app.add_subcommand("topo", "Extract the road graph and valid endpoints");
  std::string topo_map, topo_params, topo_out;
  topo->add_option("--map", topo_map, "Fused map (.occg)")->required();
  topo->add_option("--params", topo_params, "Topology parameter JSON");
  topo->add_option("--out", topo_out, "Graph JSON")->required();
  topo->callback([&] {
    action = [&] {
      const auto params = load_params<TopologyParams>(topo_params);
      const RoadGraph g = extract_topology(read_grid(topo_map), params);
      write_json(topo_out, graph_to_json(g));
      spdlog::info("topo: {} nodes, {} valid endpoints", g.node_count(), g.valid_endpoints.size());
    };
  });

  // lanes
  auto* lanes_cmd = app.add_subcommand("lanes", "Extract lanes from a road graph");
  std::string lanes_map, lanes_graph, lanes_params, lanes_out;
  lanes_cmd->add_option("--map", lanes_map, "Fused map (.occg)")->required();
  lanes_cmd->add_option("--graph", lanes_graph, "Graph JSON")->required();
  lanes_cmd->add_option("--params", lanes_params, "Lane parameter JSON");
  lanes_cmd->add_option("--out", lanes_out, "Lanes JSON")->required();
  lanes_cmd->callback([&] {
    action = [&] {
      const auto params = load_params<LaneParams>(lanes_params);
      const auto lanes = extract_lanes(graph_from_json(read_json(lanes_graph)), read_grid(lanes_map), params);
      write_json(lanes_out, lanes_to_json(lanes));
    };
  });

  // spawn
  auto* spawn = app.add_subcommand("spawn", "Spawn agents around an anchor pose");
  std::string spawn_map, spawn_lanes, spawn_graph, spawn_layout = "procedural", spawn_params, spawn_out;
  std::vector<double> spawn_anchor;
  bool spawn_ego = false;
  double spawn_wlane = 3.6;
  spawn->add_option("--map", spawn_map, "Fused map (.occg)")->required();
  spawn->add_option("--lanes", spawn_lanes, "Lanes JSON")->required();
  spawn->add_option("--graph", spawn_graph, "Graph JSON")->required();
  spawn->add_option("--layout", spawn_layout, "procedural or a heatmap file");
  spawn->add_option("--params", spawn_params, "Spawn parameter JSON");
  spawn->add_option("--anchor", spawn_anchor, "x y yaw; defaults to a random pose on the longest lane")->expected(3);
  spawn->add_flag("--ego", spawn_ego, "Place the ego vehicle at the anchor");
  spawn->add_option("--w-lane", spawn_wlane, "Lane width used for lane-graph links");
  spawn->add_option("--out", spawn_out, "Agents JSON")->required();
  spawn->callback([&] {
    action = [&] {
      const auto params = load_params<SpawnParams>(spawn_params);
      const Scene scene = load_scene(spawn_map, spawn_graph, spawn_lanes, spawn_wlane);
      Pose2 anchor;
      if (!spawn_anchor.empty()) {
        anchor = parse_pose(spawn_anchor);
      } else {
        const auto path = lane_pose_path(scene.lanes);
        Rng rng(derive_seed(seed, "anchor"));
        anchor = path[rng.index(path.size())];
      }
      auto layout = make_layout_source(spawn_layout);
      const auto agents = spawn_agents(anchor, spawn_ego, scene, *layout, derive_seed(seed, "spawn"), {}, params);
      write_json(spawn_out, agents);
      spdlog::info("spawn: {} agents", agents.size());
    };
  });

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Run the closed-loop simulation");
  std::string sim_map, sim_lanes, sim_graph, sim_params, sim_out, sim_poses, sim_layout = "procedural";
  simulate->add_option("--map", sim_map, "Fused map (.occg)")->required();
  simulate->add_option("--lanes", sim_lanes, "Lanes JSON")->required();
  simulate->add_option("--graph", sim_graph, "Graph JSON")->required();
  simulate->add_option("--params", sim_params, "Simulation parameter JSON");
  simulate->add_option("--poses", sim_poses, "Recorded ego pose path (trajectory JSON)");
  simulate->add_option("--layout", sim_layout, "procedural or a heatmap file");
  simulate->add_option("--out", sim_out, "Output directory");
  simulate->callback([&] {
    action = [&] {
      auto params = load_params<SimParams>(sim_params);
      if (seed_given) params.seed = seed;
      const Scene scene = load_scene(sim_map, sim_graph, sim_lanes, params.w_lane);
      auto layout = make_layout_source(sim_layout);
      SimWorld world{&scene, sim_poses.empty() ? lane_pose_path(scene.lanes) : read_trajectory(sim_poses).poses(),
                     layout.get()};
      const fs::path out = sim_out.empty() ? (out_dir.empty() ? "." : out_dir) : sim_out;
      fs::create_directories(out);
      const auto result = run(world, params, {}, [&](int t, const OccupancyGrid& frame) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%06d.occg", t);
        write_grid(frame, out / name);
      });
      write_json(out / "run.json", result.log);
    };
  });

  // metrics
  auto* metrics = app.add_subcommand("metrics", "Evaluation metrics (JSON on stdout)");
  metrics->require_subcommand(1);
  std::string m_a, m_b, m_out, m_kernel = "gaussian";
  double m_sigma = 1.0, m_coef = 1.0;
  int m_degree = 3;
  std::vector<std::string> m_rollouts;
  auto two_sets = [&](CLI::App* c) {
    c->add_option("--a", m_a, "Feature file")->required();
    c->add_option("--b", m_b, "Feature file")->required();
    c->add_option("--out", m_out, "Write the report here instead of stdout");
  };
  auto* m_vendi = metrics->add_subcommand("vendi", "Vendi score of one feature set");
  m_vendi->add_option("--a", m_a, "Feature file")->required();
  m_vendi->add_option("--out", m_out, "Report path");
  m_vendi->callback([&] {
    action = [&] {
      const auto x = read_features(m_a);
      emit({{"metric", "vendi"}, {"n", x.rows()}, {"value", vendi(x)}}, m_out);
    };
  });
  auto* m_mmd = metrics->add_subcommand("mmd", "Unbiased MMD^2");
  two_sets(m_mmd);
  m_mmd->add_option("--kernel", m_kernel, "gaussian|polynomial")->check(CLI::IsMember({"gaussian", "polynomial"}));
  m_mmd->add_option("--sigma", m_sigma, "Gaussian bandwidth");
  m_mmd->add_option("--degree", m_degree, "Polynomial degree");
  m_mmd->add_option("--coef", m_coef, "Polynomial offset");
  m_mmd->callback([&] {
    action = [&] {
      const Kernel k = m_kernel == "gaussian" ? Kernel::gaussian(m_sigma) : Kernel::polynomial(m_degree, m_coef);
      emit({{"metric", "mmd2"}, {"kernel", m_kernel}, {"value", mmd2(read_features(m_a), read_features(m_b), k)}},
           m_out);
    };
  });
  auto* m_kid = metrics->add_subcommand("kid", "Kernel inception distance");
  two_sets(m_kid);
  m_kid->callback([&] {
    action = [&] { emit({{"metric", "kid"}, {"value", kid(read_features(m_a), read_features(m_b))}}, m_out); };
  });
  auto* m_fid = metrics->add_subcommand("fid", "Frechet distance");
  two_sets(m_fid);
  m_fid->callback([&] {
    action = [&] {
      const auto r = fid(read_features(m_a), read_features(m_b));
      emit({{"metric", "fid"}, {"value", r.value}, {"floored", r.floored}}, m_out);
    };
  });
  auto* m_div = metrics->add_subcommand("diversity", "Pairwise mIoU diversity across rollouts");
  m_div->add_option("--rollouts", m_rollouts, "Rollout directories of frame_*.occg")->required()->expected(2, -1);
  m_div->add_option("--out", m_out, "Report path");
  m_div->callback([&] {
    action = [&] {
      std::vector<std::vector<OccupancyGrid>> rollouts;
      for (const auto& d : m_rollouts) rollouts.push_back(read_frame_dir(d));
      const auto rep = rollout_diversity(rollouts);
      emit({{"metric", "diversity"}, {"per_step", rep.per_step}, {"mean", rep.mean}}, m_out);
    };
  });
  auto* m_miou = metrics->add_subcommand("miou", "Per-class IoU and mIoU of two grids");
  two_sets(m_miou);
  m_miou->callback([&] {
    action = [&] {
      const auto r = miou(read_grid(m_a), read_grid(m_b));
      json per = json::object();
      for (const auto& [c, v] : r.per_class) per[std::to_string(c)] = v;
      emit({{"metric", "miou"}, {"per_class", per}, {"mean", r.mean}}, m_out);
    };
  });

  // pipeline
  auto* pipeline = app.add_subcommand("pipeline", "synth -> fuse -> topo -> lanes -> spawn -> simulate");
  std::string config_path;
  pipeline->add_option("--config", config_path, "Pipeline config JSON")->required();
  pipeline->callback([&] {
    action = [&] {
      PipelineConfig c = pipeline_config_from_json(read_json(config_path));
      if (seed_given) c.seed = seed;
      if (!out_dir.empty()) c.out_dir = out_dir;
      run_pipeline(c);
      std::cout << (fs::path(c.out_dir) / "manifest.json").string() << '\n';
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    spdlog::set_level(spdlog::level::from_str(log_level));
    if (action) action();
    return 0;
  } catch (const IoError& e) {
    spdlog::error("I/O error: {}", e.what());
    return kIoError;
  } catch (const FormatError& e) {
    spdlog::error("format error: {}", e.what());
    return kIoError;
  } catch (const InvalidInput& e) {
    spdlog::error("invalid configuration: {}", e.what());
    return kConfigError;
  } catch (const nlohmann::json::exception& e) {
    spdlog::error("invalid configuration: {}", e.what());
    return kConfigError;
  } catch (const StageError& e) {
    spdlog::error("stage '{}' failed: {}", e.stage(), e.what());
    return kStageError;
  } catch (const std::exception& e) {
    spdlog::error("failed: {}", e.what());
    return kStageError;
  }
}
