#include "occsim/simulation.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "occsim/serialization.hpp"

namespace occsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPullOutMargin = 1.0;

double yaw_of(const Vec2& h) { return std::atan2(h.y(), h.x()); }

const AgentAsset& asset_of(const Scene& scene, const Agent& a) {
  return scene.assets.at(static_cast<std::size_t>(a.asset_id));
}

/// Arc-length parametrisation of the recorded ego path.
class PosePath {
 public:
  explicit PosePath(const std::vector<Pose2>& poses) : poses_(poses), cum_(poses.size(), 0.0) {
    for (std::size_t k = 1; k < poses_.size(); ++k)
      cum_[k] = cum_[k - 1] + (poses_[k].translation() - poses_[k - 1].translation()).norm();
  }

  double length() const { return cum_.empty() ? 0.0 : cum_.back(); }

  double project(const Vec2& p) const {
    if (poses_.size() < 2) return 0.0;
    double best = kInf, best_s = 0.0;
    for (std::size_t k = 1; k < poses_.size(); ++k) {
      const Vec2 a = poses_[k - 1].translation(), b = poses_[k].translation();
      const Vec2 ab = b - a;
      const double len2 = ab.squaredNorm();
      const double f = len2 > 0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
      const double d = (p - (a + f * ab)).norm();
      if (d < best) {
        best = d;
        best_s = cum_[k - 1] + f * (cum_[k] - cum_[k - 1]);
      }
    }
    return best_s;
  }

  Pose2 at(double s) const {
    if (poses_.size() < 2) return poses_.front();
    s = std::clamp(s, 0.0, length());
    std::size_t k = static_cast<std::size_t>(std::upper_bound(cum_.begin(), cum_.end(), s) - cum_.begin());
    k = std::clamp<std::size_t>(k, 1, poses_.size() - 1);
    const Vec2 a = poses_[k - 1].translation(), b = poses_[k].translation();
    const double span = cum_[k] - cum_[k - 1];
    const double f = span > 0 ? (s - cum_[k - 1]) / span : 0.0;
    const Vec2 p = a + f * (b - a);
    const double yaw = span > 0 ? yaw_of(b - a) : poses_[k].yaw;
    return {p.x(), p.y(), yaw};
  }

 private:
  const std::vector<Pose2>& poses_;
  std::vector<double> cum_;
};

std::uint64_t next_spawn_seed(SimState& state, const SimParams& params) {
  return derive_seed(derive_seed(params.seed, "spawn"), state.spawn_calls++);
}

void append_spawned(SimState& state, std::vector<Agent> spawned, StepEvents* ev) {
  for (auto& a : spawned) {
    state.next_id = std::max(state.next_id, a.id + 1);
    if (ev) ev->spawned.push_back(a.id);
    state.agents.push_back(std::move(a));
  }
}

SpawnParams spawn_params(const SimParams& params) {
  SpawnParams sp = params.spawn;
  sp.conflict_s0 = params.idm.s0;
  sp.conflict_brake = params.idm.b_emergency;
  sp.conflict_reaction = params.dt;
  sp.d_lat = params.d_lat;
  return sp;
}

void refresh_ego_pose(SimState& state) {
  if (const Agent* e = state.ego()) state.ego_pose = Pose2(e->position.x(), e->position.y(), yaw_of(e->heading));
}

}  // namespace

void IdmParams::validate() const {
  if (!(v0 > 0 && a_max > 0 && b_comfort > 0 && s0 > 0 && T_headway > 0 && delta > 0 && b_emergency > 0))
    throw InvalidInput("IDM parameters must be positive");
}

void SimParams::validate() const {
  if (!(dt > 0 && d_roll > 0 && d_pre > 0 && d_lc > 0 && d_lat > 0 && w_lane > 0 && ds_step > 0))
    throw InvalidInput("simulation distances and dt must be positive");
  if (horizon < 1) throw InvalidInput("simulation horizon must be at least 1");
  if (lc_cooldown < 0) throw InvalidInput("lane-change cooldown must be non-negative");
  if (fov.x <= 0 || fov.y <= 0 || fov.z <= 0) throw InvalidInput("fov dims must be positive");
  idm.validate();
}

double idm_accel(double v, double v0, double dv, double s, const IdmParams& idm) {
  if (std::isnan(s) || s <= 0.0) return -idm.b_emergency;
  const double free_term = std::pow(v / v0, idm.delta);
  double interaction = 0.0;
  if (std::isfinite(s)) {
    const double dyn = v * idm.T_headway + v * dv / (2.0 * std::sqrt(idm.a_max * idm.b_comfort));
    const double s_star = idm.s0 + std::max(0.0, dyn);
    interaction = (s_star / s) * (s_star / s);
  }
  const double a = idm.a_max * (1.0 - free_term - interaction);
  return std::clamp(a, -idm.b_emergency, idm.a_max);
}

const Agent* SimState::ego() const {
  for (const Agent& a : agents)
    if (a.is_ego) return &a;
  return nullptr;
}

Agent* SimState::ego() {
  for (Agent& a : agents)
    if (a.is_ego) return &a;
  return nullptr;
}

bool in_fov(const Pose2& ego, const Vec2& p, const GridDims& fov, double voxel_size) {
  const Vec2 q = ego.apply_inverse(p);
  return std::fabs(q.x()) <= fov.x * 0.5 * voxel_size && std::fabs(q.y()) <= fov.y * 0.5 * voxel_size;
}

std::optional<std::size_t> select_leader(const Agent& a, const std::vector<Agent>& others, double d_lat) {
  const auto route = a.remaining_route();
  std::optional<std::size_t> best;
  double best_d = kInf;
  for (std::size_t k = 0; k < others.size(); ++k) {
    const Agent& o = others[k];
    if (o.id == a.id) continue;
    const Vec2 d = o.position - a.position;
    const double n = d.norm();
    if (n <= 0.0) continue;
    if (!(d.dot(a.heading) / n > 0.5)) continue;
    if (!(point_polyline_distance(o.position, route) < d_lat)) continue;
    if (n < best_d) {
      best_d = n;
      best = k;
    }
  }
  return best;
}

double bumper_gap(const Agent& a, const Agent& b, const std::vector<AgentAsset>& assets) {
  const double la = assets.at(static_cast<std::size_t>(a.asset_id)).length;
  const double lb = assets.at(static_cast<std::size_t>(b.asset_id)).length;
  return (b.position - a.position).norm() - 0.5 * (la + lb);
}

std::vector<Vec2> bezier(const Vec2& p0, const Vec2& p1, const Vec2& p2, const Vec2& p3, double ds_step) {
  constexpr int kDense = 64;
  std::vector<Vec2> dense;
  dense.reserve(kDense + 1);
  for (int k = 0; k <= kDense; ++k) {
    const double t = static_cast<double>(k) / kDense, u = 1.0 - t;
    dense.push_back(u * u * u * p0 + 3 * u * u * t * p1 + 3 * u * t * t * p2 + t * t * t * p3);
  }
  auto out = resample_polyline(dense, ds_step);
  out.front() = p0;
  out.back() = p3;
  return out;
}

std::optional<std::vector<Vec2>> maybe_lane_change(const Agent& a, const Agent& leader, double gap, double dv,
                                                   const Scene& scene, const std::vector<Agent>& others,
                                                   const SimParams& params) {
  // a parked vehicle's heading says nothing about traffic flow, so it is never
  // treated as oncoming; it never moves off, so it qualifies once both are stopped
  const bool head_on = !leader.is_static && a.heading.dot(leader.heading) < -0.5;
  if (!(gap < params.d_lc && (dv > 0.0 || head_on || leader.is_static))) return std::nullopt;
  const LaneGraph& g = scene.graph;
  const auto current = g.nearest(a.position, kInf);
  if (!current) return std::nullopt;
  const int cur_lane = g.lane_of(*current);

  // SearchParallelLane: nearest sample of another, parallel lane around a
  // point ahead of the agent; right-hand side first.
  const double reach = 2.0 * params.w_lane;
  const Vec2 probe = a.position + reach * a.heading;
  std::optional<int> right, left;
  double right_d = kInf, left_d = kInf;
  for (int u = 0; u < static_cast<int>(g.size()); ++u) {
    if (g.lane_of(u) == cur_lane || g.lane_of(u) < 0) continue;
    const Vec2 rel = g.position(u) - a.position;
    const double d = (g.position(u) - probe).norm();
    if (d > reach || rel.dot(a.heading) <= 0.0) continue;
    const double lateral = cross2(a.heading, rel);
    if (std::fabs(lateral) < 0.5 * params.w_lane || std::fabs(lateral) > reach) continue;
    if (std::fabs(node_tangent(scene, u).dot(a.heading)) < 0.9) continue;
    if (lateral < 0 && d < right_d) {
      right = u;
      right_d = d;
    } else if (lateral > 0 && d < left_d) {
      left = u;
      left_d = d;
    }
  }
  std::optional<int> adj = right;
  if (!adj && !head_on) adj = left;
  if (!adj) return std::nullopt;
  const Vec2 p_adj = g.position(*adj);

  const auto goal = g.nearest(a.route.back(), kInf);
  const auto path = astar(g, *adj, *goal);
  if (!path) return std::nullopt;
  if (path->size() >= 2 && (g.position((*path)[1]) - p_adj).dot(a.heading) < 0.0) return std::nullopt;

  Vec2 t_adj = node_tangent(scene, *adj);
  if (t_adj.dot(a.heading) < 0.0) t_adj = -t_adj;
  const double D = (p_adj - a.position).norm();
  auto route = bezier(a.position, a.position + 0.3 * D * a.heading, p_adj - 0.3 * D * t_adj, p_adj,
                      params.ds_step);

  // The swept transition and the target slot must be free, and the target
  // lane clear of oncoming traffic.
  const double half_a = 0.5 * asset_of(scene, a).length;
  std::vector<Agent> sweep;
  for (std::size_t k = 0; k + 1 < route.size(); ++k) {
    Agent ghost = a;
    ghost.position = route[k];
    ghost.heading = (route[k + 1] - route[k]).normalized();
    sweep.push_back(std::move(ghost));
  }
  for (const Agent& o : others) {
    if (o.id == a.id) continue;
    const AgentAsset& oa = asset_of(scene, o);
    if (std::any_of(sweep.begin(), sweep.end(),
                    [&](const Agent& ghost) { return footprints_overlap(ghost, asset_of(scene, a), o, oa); }))
      return std::nullopt;
    const Vec2 rel = o.position - p_adj;
    if (o.id != leader.id && rel.norm() < 6.0) return std::nullopt;
    if (std::fabs(cross2(a.heading, rel)) >= 0.5 * params.w_lane) continue;
    const double along = rel.dot(a.heading);
    const double cos_h = o.heading.dot(a.heading);
    if (cos_h < -0.5 && along > 0.0 && rel.norm() < params.d_lc) return std::nullopt;
    // the new leader in the target lane must not force more than comfortable braking
    if (along > 0.0) {
      const double s = rel.norm() - half_a - 0.5 * oa.length;
      const double dv_new = cos_h < -0.5 ? a.speed + o.speed : a.speed - o.speed;
      const double v0 = a.desired_speed > 0.0 ? a.desired_speed : params.idm.v0;
      if (idm_accel(a.speed, v0, dv_new, s, params.idm) < -params.idm.b_comfort) return std::nullopt;
    }
    // anything in the target lane short of the merge point follows after the
    // change and must not need more than comfortable braking
    if (cos_h > 0.5 && along <= 0.0 && !o.is_static) {
      const double s = rel.norm() - half_a - 0.5 * oa.length;
      const double v0 = o.desired_speed > 0.0 ? o.desired_speed : params.idm.v0;
      if (idm_accel(o.speed, v0, o.speed - a.speed, s, params.idm) < -params.idm.b_comfort) return std::nullopt;
    }
  }
  for (std::size_t k = 1; k < path->size(); ++k) route.push_back(g.position((*path)[k]));
  return route;
}

void advance_along_route(Agent& a, double dist) {
  while (dist > 0.0 && a.next < a.route.size()) {
    const Vec2 d = a.route[a.next] - a.position;
    const double len = d.norm();
    if (len <= dist) {
      a.position = a.route[a.next];
      dist -= len;
      ++a.next;
    } else {
      a.position += d / len * dist;
      dist = 0.0;
    }
  }
  while (a.next < a.route.size()) {
    const Vec2 d = a.route[a.next] - a.position;
    if (d.norm() > 1e-9) {
      a.heading = d.normalized();
      break;
    }
    ++a.next;
  }
}

SimState initialize(const SimWorld& world, const SimParams& params) {
  params.validate();
  if (!world.scene || !world.layout) throw InvalidInput("simulation world is incomplete");
  if (world.ego_path.empty()) throw InvalidInput("simulation needs a non-empty ego pose path");
  const Scene& scene = *world.scene;
  const PosePath path(world.ego_path);

  SimState state;
  Rng init(derive_seed(params.seed, "init"));
  for (int attempt = 0; attempt < 32 && !state.ego(); ++attempt) {
    const Pose2 start = world.ego_path[init.index(world.ego_path.size())];
    state.agents.clear();
    state.next_id = 0;
    append_spawned(state, spawn_agents(start, true, scene, *world.layout, next_spawn_seed(state, params), {},
                                       spawn_params(params), 0),
                   nullptr);
  }
  if (!state.ego()) throw InvalidInput("could not place the ego vehicle on a routable lane");
  refresh_ego_pose(state);

  const double s = path.project(state.ego_pose.translation());
  for (const double anchor_s : {s + params.d_pre, s - params.d_pre}) {
    append_spawned(state,
                   spawn_agents(path.at(anchor_s), false, scene, *world.layout, next_spawn_seed(state, params),
                                state.agents, spawn_params(params), state.next_id),
                   nullptr);
  }
  spdlog::info("simulation: initial spawn of {} agents", state.agents.size());
  return state;
}

StepEvents rolling_update(SimState& state, const SimWorld& world, const SimParams& params) {
  StepEvents ev;
  const Agent* ego = state.ego();
  if (!ego) return ev;
  state.moved += ego->speed * params.dt;
  if (state.moved < params.d_roll) return ev;
  ev.rolled = true;

  const double vs = world.scene->map.voxel_size();
  std::vector<Agent> kept;
  for (Agent& a : state.agents) {
    if (a.is_ego || in_fov(state.ego_pose, a.position, params.fov, vs)) {
      kept.push_back(std::move(a));
    } else {
      ev.culled.push_back(a.id);
    }
  }
  state.agents = std::move(kept);

  const PosePath path(world.ego_path);
  const double s = path.project(state.ego_pose.translation());
  for (const double anchor_s : {s + params.d_pre, s - params.d_pre}) {
    append_spawned(state,
                   spawn_agents(path.at(anchor_s), false, *world.scene, *world.layout,
                                next_spawn_seed(state, params), state.agents, spawn_params(params), state.next_id),
                   &ev);
  }
  state.moved = 0.0;
  return ev;
}

StepEvents update_agents(SimState& state, const Scene& scene, const SimParams& params, const EgoPolicy& policy) {
  StepEvents ev;
  const std::vector<Agent> snapshot = state.agents;
  std::vector<Agent> next;
  next.reserve(snapshot.size());
  for (const Agent& prev : snapshot) {
    Agent a = prev;
    if (a.cooldown > 0) --a.cooldown;
    if (a.is_static) {
      next.push_back(std::move(a));
      continue;
    }
    double s = kInf, dv = 0.0;
    if (const auto li = select_leader(prev, snapshot, params.d_lat)) {
      const Agent& lead = snapshot[*li];
      s = bumper_gap(prev, lead, scene.assets);
      const bool head_on = prev.heading.dot(lead.heading) < -0.5;
      // stop far enough short of a parked or oncoming vehicle to swing out around it later
      if (lead.is_static || head_on) s -= kPullOutMargin;
      dv = head_on ? prev.speed + lead.speed : prev.speed - lead.speed;
      if (a.cooldown == 0) {
        if (auto route = maybe_lane_change(prev, lead, s, dv, scene, snapshot, params)) {
          a.route = std::move(*route);
          a.next = 1;
          a.cooldown = params.lc_cooldown;
          ev.lane_changes.push_back(a.id);
        }
      }
    }
    std::optional<double> forced;
    if (a.is_ego && policy) forced = policy(state, prev);
    if (forced) {
      a.speed = std::max(0.0, *forced);
    } else if (a.desired_speed > 0.0) {
      const double acc = idm_accel(a.speed, a.desired_speed, dv, s, params.idm);
      a.speed = std::max(0.0, a.speed + acc * params.dt);
    } else {
      a.speed = 0.0;
    }
    advance_along_route(a, a.speed * params.dt);
    if (a.route_done()) {
      if (!a.is_ego) {
        ev.completed.push_back(a.id);
        continue;
      }
      a.speed = 0.0;
    }
    next.push_back(std::move(a));
  }
  state.agents = std::move(next);
  refresh_ego_pose(state);
  return ev;
}

OccupancyGrid render(const SimState& state, const Scene& scene, const SimParams& params) {
  OccupancyGrid frame = crop(scene.map, state.ego_pose, params.fov);
  const double vs = frame.voxel_size();
  const int W = frame.dims().x, H = frame.dims().y, Z = frame.dims().z;
  for (const Agent& a : state.agents) {
    if (!in_fov(state.ego_pose, a.position, params.fov, vs)) continue;
    const AgentAsset& asset = asset_of(scene, a);
    const int nL = static_cast<int>(std::ceil(asset.length / vs - 1e-9));
    const int nW = static_cast<int>(std::ceil(asset.width / vs - 1e-9));
    const int nH = static_cast<int>(std::ceil(asset.height / vs - 1e-9));
    const Vec2 c = state.ego_pose.apply_inverse(a.position) / vs;  // voxel units
    const double rel = yaw_of(a.heading) - state.ego_pose.yaw;
    const double cr = std::cos(rel), sr = std::sin(rel);
    const double reach = 0.5 * std::hypot(nL, nW) + 1.0;
    const int i0 = std::max(0, static_cast<int>(std::floor(c.x() + W / 2.0 - reach)));
    const int i1 = std::min(W - 1, static_cast<int>(std::ceil(c.x() + W / 2.0 + reach)));
    const int j0 = std::max(0, static_cast<int>(std::floor(c.y() + H / 2.0 - reach)));
    const int j1 = std::min(H - 1, static_cast<int>(std::ceil(c.y() + H / 2.0 + reach)));
    for (int i = i0; i <= i1; ++i) {
      for (int j = j0; j <= j1; ++j) {
        const double dx = i + 0.5 - W / 2.0 - c.x(), dy = j + 0.5 - H / 2.0 - c.y();
        const double bx = cr * dx + sr * dy, by = -sr * dx + cr * dy;
        if (!(bx >= -nL / 2.0 && bx < nL / 2.0 && by >= -nW / 2.0 && by < nW / 2.0)) continue;
        for (int z = 1; z <= nH && z < Z; ++z) frame.at(i, j, z) = asset.label;
      }
    }
  }
  return frame;
}

StepResult step(SimState& state, const SimWorld& world, const SimParams& params, const EgoPolicy& policy) {
  StepEvents ev = rolling_update(state, world, params);
  StepEvents moved = update_agents(state, *world.scene, params, policy);
  ev.completed = std::move(moved.completed);
  ev.lane_changes = std::move(moved.lane_changes);
  ++state.t;
  return {render(state, *world.scene, params), std::move(ev)};
}

bool footprints_overlap(const Agent& a, const AgentAsset& aa, const Agent& b, const AgentAsset& ba) {
  const Vec2 ha = a.heading.normalized(), hb = b.heading.normalized();
  const Vec2 axes[4] = {ha, Vec2(-ha.y(), ha.x()), hb, Vec2(-hb.y(), hb.x())};
  const Vec2 d = b.position - a.position;
  for (const Vec2& ax : axes) {
    const double ra = 0.5 * aa.length * std::fabs(ha.dot(ax)) + 0.5 * aa.width * std::fabs(cross2(ha, ax));
    const double rb = 0.5 * ba.length * std::fabs(hb.dot(ax)) + 0.5 * ba.width * std::fabs(cross2(hb, ax));
    if (std::fabs(d.dot(ax)) >= ra + rb) return false;
  }
  return true;
}

namespace {

nlohmann::json agent_summary(const Agent& a) {
  return {{"id", a.id},           {"x", a.position.x()}, {"y", a.position.y()},
          {"yaw", yaw_of(a.heading)}, {"speed", a.speed},  {"static", a.is_static},
          {"ego", a.is_ego},      {"asset", a.asset_id}};
}

}  // namespace

RunResult run(const SimWorld& world, const SimParams& params, const EgoPolicy& policy, const FrameSink& sink) {
  SimState state = initialize(world, params);
  RunResult out;
  out.log["seed"] = params.seed;
  out.log["initial_agents"] = nlohmann::json::array();
  for (const Agent& a : state.agents) out.log["initial_agents"].push_back(agent_summary(a));
  auto& steps = out.log["steps"] = nlohmann::json::array();
  if (!sink) out.frames.reserve(static_cast<std::size_t>(params.horizon));
  for (int t = 0; t < params.horizon; ++t) {
    StepResult r = step(state, world, params, policy);
    out.lane_changes += static_cast<int>(r.events.lane_changes.size());
    int overlaps = 0;
    for (std::size_t i = 0; i < state.agents.size(); ++i)
      for (std::size_t j = i + 1; j < state.agents.size(); ++j)
        if (footprints_overlap(state.agents[i], asset_of(*world.scene, state.agents[i]), state.agents[j],
                               asset_of(*world.scene, state.agents[j])))
          ++overlaps;
    out.overlap_violations += overlaps;
    nlohmann::json s;
    s["t"] = state.t;
    s["ego_pose"] = state.ego_pose;
    s["agents"] = nlohmann::json::array();
    for (const Agent& a : state.agents) s["agents"].push_back(agent_summary(a));
    s["rolled"] = r.events.rolled;
    s["spawned"] = r.events.spawned;
    s["culled"] = r.events.culled;
    s["completed"] = r.events.completed;
    s["lane_changes"] = r.events.lane_changes;
    s["overlaps"] = overlaps;
    steps.push_back(std::move(s));
    ++out.frame_count;
    if (sink) {
      sink(state.t - 1, r.frame);
    } else {
      out.frames.push_back(std::move(r.frame));
    }
  }
  out.log["lane_changes"] = out.lane_changes;
  out.log["overlap_violations"] = out.overlap_violations;
  spdlog::info("simulation: {} frames, {} lane changes, {} overlap events", out.frame_count, out.lane_changes,
               out.overlap_violations);
  return out;
}

}  // namespace occsim
