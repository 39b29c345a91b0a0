#include "occsim/lanes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include <Eigen/Dense>
#include <spdlog/spdlog.h>

namespace occsim {

double Lane::length() const {
  double s = 0;
  for (std::size_t k = 1; k < points.size(); ++k) s += (points[k] - points[k - 1]).norm();
  return s;
}

void LaneParams::validate() const {
  if (!(w_lane > 0 && epsilon > 0 && ds_step > 0)) throw InvalidInput("lane parameters must be positive");
  if (!(epsilon < w_lane)) throw InvalidInput("lane epsilon must be smaller than w_lane");
  if (min_segment_pts < 2 || min_lane_pts < 2) throw InvalidInput("lane point minimums too small");
}

bool DrivableMask::contains(const Vec2& world) const {
  const auto cell = geometry.cell_of(world);
  return cell && mask.at(cell->first, cell->second);
}

DrivableMask drivable_mask(const GlobalMap& map) { return {road_mask(map), map.geometry()}; }

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

double point_polyline_distance(const Vec2& p, std::span<const Vec2> poly) {
  if (poly.empty()) return std::numeric_limits<double>::infinity();
  if (poly.size() == 1) return (p - poly[0]).norm();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < poly.size(); ++k) best = std::min(best, point_segment_distance(p, poly[k - 1], poly[k]));
  return best;
}

std::vector<Vec2> resample_polyline(std::span<const Vec2> poly, double ds_step) {
  if (poly.size() < 2) return {poly.begin(), poly.end()};
  std::vector<double> cum(poly.size(), 0.0);
  for (std::size_t k = 1; k < poly.size(); ++k) cum[k] = cum[k - 1] + (poly[k] - poly[k - 1]).norm();
  const double L = cum.back();
  if (L <= 0.0) return {poly.front()};
  const auto n = static_cast<std::size_t>(std::max(1.0, std::round(L / ds_step)));
  std::vector<Vec2> out;
  out.reserve(n + 1);
  out.push_back(poly.front());
  std::size_t seg = 1;
  for (std::size_t k = 1; k < n; ++k) {
    const double s = L * static_cast<double>(k) / static_cast<double>(n);
    while (seg + 1 < poly.size() && cum[seg] < s) ++seg;
    const double span = cum[seg] - cum[seg - 1];
    const double f = span > 0 ? (s - cum[seg - 1]) / span : 0.0;
    out.push_back(poly[seg - 1] + f * (poly[seg] - poly[seg - 1]));
  }
  out.push_back(poly.back());
  return out;
}

namespace {

/// Non-zero basis functions N_{span-p..span, p}(t) (The NURBS Book, A2.2).
std::size_t basis_functions(double t, int p, const std::vector<double>& knots, int m,
                            std::vector<double>& N) {
  std::size_t span;
  if (t >= knots[static_cast<std::size_t>(m)]) {
    span = static_cast<std::size_t>(m - 1);
  } else {
    span = static_cast<std::size_t>(std::upper_bound(knots.begin(), knots.end(), t) - knots.begin()) - 1;
    span = std::clamp<std::size_t>(span, static_cast<std::size_t>(p), static_cast<std::size_t>(m - 1));
  }
  N.assign(static_cast<std::size_t>(p) + 1, 0.0);
  std::vector<double> left(static_cast<std::size_t>(p) + 1), right(static_cast<std::size_t>(p) + 1);
  N[0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[static_cast<std::size_t>(j)] = t - knots[span + 1 - static_cast<std::size_t>(j)];
    right[static_cast<std::size_t>(j)] = knots[span + static_cast<std::size_t>(j)] - t;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double denom = right[static_cast<std::size_t>(r) + 1] + left[static_cast<std::size_t>(j - r)];
      const double tmp = denom != 0.0 ? N[static_cast<std::size_t>(r)] / denom : 0.0;
      N[static_cast<std::size_t>(r)] = saved + right[static_cast<std::size_t>(r) + 1] * tmp;
      saved = left[static_cast<std::size_t>(j - r)] * tmp;
    }
    N[static_cast<std::size_t>(j)] = saved;
  }
  return span;
}

}  // namespace

std::vector<Vec2> fit_centerline(std::span<const Vec2> path, double ds_step) {
  if (!(ds_step > 0)) throw InvalidInput("fit_centerline: ds_step must be positive");
  std::vector<Vec2> pts;
  for (const Vec2& p : path)
    if (pts.empty() || (p - pts.back()).norm() > 1e-12) pts.push_back(p);
  if (pts.size() < 2) throw InvalidInput("fit_centerline: need at least two distinct points");

  const int n = static_cast<int>(pts.size());
  std::vector<double> t(static_cast<std::size_t>(n), 0.0);
  for (int k = 1; k < n; ++k) t[static_cast<std::size_t>(k)] = t[static_cast<std::size_t>(k - 1)] + (pts[static_cast<std::size_t>(k)] - pts[static_cast<std::size_t>(k - 1)]).norm();
  const double total = t.back();
  for (double& v : t) v /= total;

  const int m = std::clamp(n / 5 + 3, std::min(n, 4), n);  // control points
  const int p = std::min(3, m - 1);
  std::vector<double> knots;
  for (int k = 0; k <= p; ++k) knots.push_back(0.0);
  for (int k = 1; k < m - p; ++k) knots.push_back(static_cast<double>(k) / (m - p));
  for (int k = 0; k <= p; ++k) knots.push_back(1.0);

  // Least squares for interior control points; the clamped ends are fixed.
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, m);
  std::vector<double> N;
  for (int k = 0; k < n; ++k) {
    const std::size_t span = basis_functions(t[static_cast<std::size_t>(k)], p, knots, m, N);
    for (int r = 0; r <= p; ++r) A(k, static_cast<int>(span) - p + r) = N[static_cast<std::size_t>(r)];
  }
  Eigen::MatrixXd Q(n, 2);
  for (int k = 0; k < n; ++k) Q.row(k) = pts[static_cast<std::size_t>(k)].transpose();
  Eigen::MatrixXd P(m, 2);
  P.row(0) = pts.front().transpose();
  P.row(m - 1) = pts.back().transpose();
  if (m > 2) {
    const Eigen::MatrixXd rhs = Q - A.col(0) * P.row(0) - A.col(m - 1) * P.row(m - 1);
    const Eigen::MatrixXd Ai = A.middleCols(1, m - 2);
    P.middleRows(1, m - 2) = Ai.colPivHouseholderQr().solve(rhs);
  }

  const int dense = std::max(64, 10 * n);
  std::vector<Vec2> curve;
  curve.reserve(static_cast<std::size_t>(dense) + 1);
  for (int k = 0; k <= dense; ++k) {
    const double u = static_cast<double>(k) / dense;
    const std::size_t span = basis_functions(u, p, knots, m, N);
    Vec2 c = Vec2::Zero();
    for (int r = 0; r <= p; ++r) c += N[static_cast<std::size_t>(r)] * P.row(static_cast<int>(span) - p + r).transpose();
    curve.push_back(c);
  }
  curve.front() = pts.front();
  curve.back() = pts.back();
  return resample_polyline(curve, ds_step);
}

std::vector<Vec2> polyline_normals(std::span<const Vec2> pts) {
  std::vector<Vec2> out(pts.size(), Vec2(0, 1));
  if (pts.size() < 2) return out;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const Vec2 a = pts[k == 0 ? 0 : k - 1];
    const Vec2 b = pts[k + 1 == pts.size() ? k : k + 1];
    Vec2 tangent = b - a;
    if (tangent.norm() < 1e-12) continue;
    tangent.normalize();
    out[k] = Vec2(-tangent.y(), tangent.x());
  }
  return out;
}

namespace {

/// 1D squared distance transform (Felzenszwalb & Huttenlocher).
void edt_1d(const std::vector<double>& f, std::vector<double>& d) {
  const int n = static_cast<int>(f.size());
  std::vector<int> v(static_cast<std::size_t>(n));
  std::vector<double> z(static_cast<std::size_t>(n) + 1);
  int k = 0;
  int first = -1;
  for (int q = 0; q < n; ++q) {
    if (std::isinf(f[static_cast<std::size_t>(q)])) continue;
    if (first < 0) {
      first = q;
      v[0] = q;
      z[0] = -std::numeric_limits<double>::infinity();
      z[1] = std::numeric_limits<double>::infinity();
      continue;
    }
    double s;
    while (true) {
      const int r = v[static_cast<std::size_t>(k)];
      s = ((f[static_cast<std::size_t>(q)] + q * q) - (f[static_cast<std::size_t>(r)] + r * r)) / (2.0 * (q - r));
      if (s <= z[static_cast<std::size_t>(k)]) {
        if (k == 0) break;
        --k;
      } else {
        break;
      }
    }
    if (s <= z[static_cast<std::size_t>(k)]) {
      v[static_cast<std::size_t>(k)] = q;
      z[static_cast<std::size_t>(k)] = -std::numeric_limits<double>::infinity();
    } else {
      ++k;
      v[static_cast<std::size_t>(k)] = q;
      z[static_cast<std::size_t>(k)] = s;
    }
    z[static_cast<std::size_t>(k) + 1] = std::numeric_limits<double>::infinity();
  }
  d.assign(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  if (first < 0) return;
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[static_cast<std::size_t>(k) + 1] < q) ++k;
    const int r = v[static_cast<std::size_t>(k)];
    d[static_cast<std::size_t>(q)] = (q - r) * (q - r) + f[static_cast<std::size_t>(r)];
  }
}

}  // namespace

std::vector<double> distance_transform(const DrivableMask& m) {
  const int W = m.mask.width, H = m.mask.height;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> grid(static_cast<std::size_t>(W) * H);
  for (std::size_t k = 0; k < grid.size(); ++k) grid[k] = m.mask.bits[k] ? inf : 0.0;
  std::vector<double> f, d;
  for (int i = 0; i < W; ++i) {
    f.assign(grid.begin() + static_cast<long>(i) * H, grid.begin() + static_cast<long>(i + 1) * H);
    edt_1d(f, d);
    std::copy(d.begin(), d.end(), grid.begin() + static_cast<long>(i) * H);
  }
  f.resize(static_cast<std::size_t>(W));
  for (int j = 0; j < H; ++j) {
    for (int i = 0; i < W; ++i) f[static_cast<std::size_t>(i)] = grid[static_cast<std::size_t>(i) * H + j];
    edt_1d(f, d);
    for (int i = 0; i < W; ++i) grid[static_cast<std::size_t>(i) * H + j] = d[static_cast<std::size_t>(i)];
  }
  for (double& v : grid) v = std::sqrt(v) * m.geometry.voxel_size;
  return grid;
}

double estimate_segment_width(std::span<const Vec2> center, const DrivableMask& m,
                              const std::vector<double>& dt) {
  std::vector<double> samples;
  for (const Vec2& p : center) {
    const auto cell = m.geometry.cell_of(p);
    if (!cell) continue;
    const double v = dt[static_cast<std::size_t>(cell->first) * m.mask.height + cell->second];
    if (std::isfinite(v) && v > 0) samples.push_back(v);
  }
  if (samples.empty()) return 0.0;
  const auto mid = samples.begin() + static_cast<long>(samples.size() / 2);
  std::nth_element(samples.begin(), mid, samples.end());
  return 2.0 * *mid;
}

std::vector<Lane> offset_lanes(std::span<const Vec2> center, double seg_width, const LaneParams& params,
                               const DrivableMask& drivable, int source_segment) {
  const int n = static_cast<int>(std::floor(seg_width / params.w_lane + 1e-9)) - 1;
  if (n <= 0) return {Lane{0, {center.begin(), center.end()}, source_segment, 0}};
  const auto normals = polyline_normals(center);
  std::vector<Lane> out;
  for (int i = 0; i < n; ++i) {
    const double o = (i - (n - 1) / 2.0) * params.w_lane;
    Lane lane{0, {}, source_segment, 2 * i - (n - 1)};
    lane.points.reserve(center.size());
    for (std::size_t k = 0; k < center.size(); ++k) lane.points.push_back(center[k] + o * normals[k]);
    bool inside = true;
    for (std::size_t k = 1; k + 1 < lane.points.size() && inside; ++k) inside = drivable.contains(lane.points[k]);
    if (inside) {
      out.push_back(std::move(lane));
    } else {
      spdlog::debug("lanes: offset {} of segment {} leaves the drivable mask", o, source_segment);
    }
  }
  return out;
}

namespace {

struct CellKey {
  long x, y;
  bool operator==(const CellKey&) const = default;
};
struct CellHash {
  std::size_t operator()(const CellKey& k) const {
    return std::hash<long>()(k.x * 73856093L ^ k.y * 19349663L);
  }
};

/// Uniform grid of polyline segments for epsilon-range queries.
class SegmentHash {
 public:
  explicit SegmentHash(double cell) : cell_(cell) {}

  void insert(int lane, const Vec2& a, const Vec2& b) {
    const long x0 = key(std::min(a.x(), b.x())), x1 = key(std::max(a.x(), b.x()));
    const long y0 = key(std::min(a.y(), b.y())), y1 = key(std::max(a.y(), b.y()));
    const int id = static_cast<int>(segs_.size());
    segs_.push_back({lane, a, b});
    for (long x = x0; x <= x1; ++x)
      for (long y = y0; y <= y1; ++y) cells_[{x, y}].push_back(id);
  }

  /// True when a segment of another lane lies closer than eps to p.
  bool near_other(const Vec2& p, int lane, double eps) const {
    const long cx = key(p.x()), cy = key(p.y());
    for (long x = cx - 1; x <= cx + 1; ++x) {
      for (long y = cy - 1; y <= cy + 1; ++y) {
        const auto it = cells_.find({x, y});
        if (it == cells_.end()) continue;
        for (int id : it->second) {
          const Seg& s = segs_[static_cast<std::size_t>(id)];
          if (s.lane != lane && point_segment_distance(p, s.a, s.b) < eps) return true;
        }
      }
    }
    return false;
  }

 private:
  struct Seg {
    int lane;
    Vec2 a, b;
  };
  long key(double v) const { return static_cast<long>(std::floor(v / cell_)); }

  double cell_;
  std::vector<Seg> segs_;
  std::unordered_map<CellKey, std::vector<int>, CellHash> cells_;
};

}  // namespace

std::vector<Lane> resolve_overlaps(const std::vector<Lane>& candidates, const LaneParams& params) {
  params.validate();
  SegmentHash hash(params.epsilon);
  for (std::size_t l = 0; l < candidates.size(); ++l) {
    const auto& pts = candidates[l].points;
    if (pts.size() == 1) hash.insert(static_cast<int>(l), pts[0], pts[0]);
    for (std::size_t k = 1; k < pts.size(); ++k) hash.insert(static_cast<int>(l), pts[k - 1], pts[k]);
  }

  std::vector<Lane> out;
  for (std::size_t l = 0; l < candidates.size(); ++l) {
    const auto& pts = candidates[l].points;
    std::size_t best_start = 0, best_len = 0, run_start = 0, run_len = 0;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      if (hash.near_other(pts[k], static_cast<int>(l), params.epsilon)) {
        run_len = 0;
        continue;
      }
      if (run_len == 0) run_start = k;
      ++run_len;
      if (run_len > best_len) {
        best_len = run_len;
        best_start = run_start;
      }
    }
    if (best_len < static_cast<std::size_t>(params.min_lane_pts)) continue;
    Lane lane = candidates[l];
    if (best_len != pts.size()) {
      const std::span<const Vec2> run(pts.data() + best_start, best_len);
      lane.points = fit_centerline(run, params.ds_step);
    }
    if (lane.points.size() < static_cast<std::size_t>(params.min_lane_pts)) continue;
    out.push_back(std::move(lane));
  }
  for (std::size_t k = 0; k < out.size(); ++k) out[k].id = static_cast<int>(k);
  return out;
}

std::vector<Lane> extract_lanes(const RoadGraph& graph, const GlobalMap& map, const LaneParams& params) {
  params.validate();
  const DrivableMask drivable = drivable_mask(map);
  const auto dt = distance_transform(drivable);
  const auto segments = extract_segments(graph);
  std::vector<Lane> candidates;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    if (segments[s].size() < static_cast<std::size_t>(params.min_segment_pts)) continue;
    std::vector<Vec2> path;
    for (int u : segments[s]) path.push_back(graph.world(u));
    const auto center = fit_centerline(path, params.ds_step);
    const double width = estimate_segment_width(center, drivable, dt);
    auto lanes = offset_lanes(center, width, params, drivable, static_cast<int>(s));
    candidates.insert(candidates.end(), std::make_move_iterator(lanes.begin()), std::make_move_iterator(lanes.end()));
  }
  auto lanes = resolve_overlaps(candidates, params);
  spdlog::info("lanes: {} segments, {} candidates, {} final lanes", segments.size(), candidates.size(), lanes.size());
  return lanes;
}

}  // namespace occsim
