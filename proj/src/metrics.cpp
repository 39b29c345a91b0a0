#include "occsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <Eigen/Eigenvalues>
#include <spdlog/spdlog.h>

#include "byte_io.hpp"
#include "occsim/parallel.hpp"
#include "occsim/serialization.hpp"

namespace occsim {

IouReport miou(std::span<const Label> a, std::span<const Label> b, const std::vector<Label>& classes) {
  if (a.size() != b.size()) throw InvalidInput("miou: inputs differ in size");
  std::array<std::size_t, 256> inter{}, uni{};
  std::array<bool, 256> wanted{};
  for (Label c : classes) wanted[c] = true;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const Label la = a[k], lb = b[k];
    if (la == lb) {
      if (wanted[la]) ++inter[la], ++uni[la];
    } else {
      if (wanted[la]) ++uni[la];
      if (wanted[lb]) ++uni[lb];
    }
  }
  IouReport r;
  double sum = 0;
  for (int c = 0; c < 256; ++c) {
    if (!wanted[static_cast<std::size_t>(c)] || uni[static_cast<std::size_t>(c)] == 0) continue;
    const double iou = static_cast<double>(inter[static_cast<std::size_t>(c)]) / static_cast<double>(uni[static_cast<std::size_t>(c)]);
    r.per_class[static_cast<Label>(c)] = iou;
    sum += iou;
  }
  r.mean = r.per_class.empty() ? 1.0 : sum / static_cast<double>(r.per_class.size());
  return r;
}

namespace {

std::vector<Label> present_classes(const std::vector<const OccupancyGrid*>& grids) {
  std::array<bool, 256> seen{};
  for (const auto* g : grids)
    for (Label l : g->labels()) seen[l] = true;
  std::vector<Label> out;
  const Label unassigned = grids.front()->table().unassigned();
  for (int c = 0; c < 256; ++c)
    if (seen[static_cast<std::size_t>(c)] && c != unassigned) out.push_back(static_cast<Label>(c));
  return out;
}

}  // namespace

IouReport miou(const OccupancyGrid& a, const OccupancyGrid& b, const std::optional<std::vector<Label>>& classes) {
  if (!(a.dims() == b.dims())) throw InvalidInput("miou: grid dims differ");
  const auto cls = classes ? *classes : present_classes({&a, &b});
  return miou(std::span<const Label>(a.labels()), std::span<const Label>(b.labels()), cls);
}

double pairwise_diversity(const std::vector<OccupancyGrid>& grids, const std::optional<std::vector<Label>>& classes) {
  if (grids.size() < 2) throw InvalidInput("pairwise_diversity needs at least two rollouts");
  double sum = 0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < grids.size(); ++i)
    for (std::size_t j = i + 1; j < grids.size(); ++j, ++pairs) sum += miou(grids[i], grids[j], classes).mean;
  return 1.0 - sum / static_cast<double>(pairs);
}

DiversityReport rollout_diversity(const std::vector<std::vector<OccupancyGrid>>& rollouts,
                                  const std::optional<std::vector<Label>>& classes) {
  if (rollouts.size() < 2) throw InvalidInput("rollout_diversity needs at least two rollouts");
  const std::size_t T = rollouts.front().size();
  for (const auto& r : rollouts)
    if (r.size() != T) throw InvalidInput("rollouts differ in length");
  DiversityReport rep;
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<OccupancyGrid> at_t;
    for (const auto& r : rollouts) at_t.push_back(r[t]);
    rep.per_step.push_back(pairwise_diversity(at_t, classes));
  }
  double s = 0;
  for (double v : rep.per_step) s += v;
  rep.mean = T ? s / static_cast<double>(T) : 0.0;
  return rep;
}

double vendi(const Features& x) {
  const auto n = x.rows();
  if (n < 1) throw InvalidInput("vendi needs at least one sample");
  if (!x.allFinite()) throw InvalidInput("vendi: non-finite features");
  Eigen::MatrixXd u = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double norm = u.row(i).norm();
    if (norm == 0.0) throw InvalidInput("vendi: zero feature vector");
    u.row(i) /= norm;
  }
  Eigen::MatrixXd q = (Eigen::MatrixXd::Ones(n, n) + u * u.transpose()) * 0.5;
  q /= q.trace();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q, Eigen::EigenvaluesOnly);
  double h = 0;
  for (Eigen::Index k = 0; k < n; ++k) {
    double lam = es.eigenvalues()(k);
    if (lam < -1e-10) spdlog::warn("vendi: eigenvalue {} below tolerance clamped to 0", lam);
    if (lam <= 0) continue;
    h -= lam * std::log(lam);
  }
  return std::exp(h);
}

double Kernel::operator()(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                          const Eigen::Ref<const Eigen::RowVectorXd>& b) const {
  if (type == Type::gaussian) return std::exp(-(a - b).squaredNorm() / (2.0 * sigma * sigma));
  return std::pow(a.dot(b) / static_cast<double>(a.size()) + coef, degree);
}

namespace {

/// Sum of k(a_i, b_j) over all pairs, skipping i == j when requested.
/// Row sums are computed in parallel and added in order.
double kernel_sum(const Features& a, const Features& b, const Kernel& k, bool skip_diagonal) {
  std::vector<double> rows(static_cast<std::size_t>(a.rows()), 0.0);
  parallel_for(0, rows.size(), [&](std::size_t i) {
    double s = 0;
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      if (skip_diagonal && static_cast<Eigen::Index>(i) == j) continue;
      s += k(a.row(static_cast<Eigen::Index>(i)), b.row(j));
    }
    rows[i] = s;
  });
  double total = 0;
  for (double r : rows) total += r;
  return total;
}

}  // namespace

double mmd2(const Features& x, const Features& y, const Kernel& k) {
  const double m = static_cast<double>(x.rows()), n = static_cast<double>(y.rows());
  if (x.rows() < 2 || y.rows() < 2) throw InvalidInput("mmd needs at least two samples per set");
  if (x.cols() != y.cols()) throw InvalidInput("mmd: feature dimensions differ");
  const double kxx = kernel_sum(x, x, k, true) / (m * (m - 1));
  const double kyy = kernel_sum(y, y, k, true) / (n * (n - 1));
  const bool paired = x.rows() == y.rows();
  const double kxy = paired ? kernel_sum(x, y, k, true) / (m * (m - 1)) : kernel_sum(x, y, k, false) / (m * n);
  return kxx + kyy - 2.0 * kxy;
}

double kid(const Features& x, const Features& y) { return mmd2(x, y, Kernel::polynomial(3, 1.0)); }

namespace {

struct Moments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

Moments moments(const Features& x) {
  Moments m;
  m.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd c = x.rowwise() - m.mean.transpose();
  m.cov = (c.transpose() * c) / static_cast<double>(x.rows() - 1);
  return m;
}

}  // namespace

FidResult fid(const Features& x, const Features& y) {
  if (x.rows() < 2 || y.rows() < 2) throw InvalidInput("fid needs at least two samples per set");
  if (x.cols() != y.cols()) throw InvalidInput("fid: feature dimensions differ");
  constexpr double kFloor = 1e-10;
  const Moments mx = moments(x), my = moments(y);
  FidResult r;

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ex(mx.cov);
  Eigen::VectorXd lx = ex.eigenvalues();
  for (Eigen::Index k = 0; k < lx.size(); ++k) {
    if (lx(k) < kFloor) {
      lx(k) = kFloor;
      r.floored = true;
    }
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ey(my.cov, Eigen::EigenvaluesOnly);
  for (Eigen::Index k = 0; k < ey.eigenvalues().size(); ++k)
    if (ey.eigenvalues()(k) < kFloor) r.floored = true;

  const Eigen::MatrixXd sx = ex.eigenvectors() * lx.cwiseSqrt().asDiagonal() * ex.eigenvectors().transpose();
  Eigen::MatrixXd m = sx * my.cov * sx;
  m = 0.5 * (m + m.transpose());
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(m, Eigen::EigenvaluesOnly);
  double tr_sqrt = 0;
  for (Eigen::Index k = 0; k < em.eigenvalues().size(); ++k) tr_sqrt += std::sqrt(std::max(0.0, em.eigenvalues()(k)));

  r.value = (mx.mean - my.mean).squaredNorm() + mx.cov.trace() + my.cov.trace() - 2.0 * tr_sqrt;
  if (r.floored) spdlog::warn("fid: covariance eigenvalues floored at {}", kFloor);
  return r;
}

void write_features(const Features& x, const std::filesystem::path& path) {
  detail::ByteWriter w;
  w.raw("OCCF");
  w.le(std::uint32_t{1});
  w.le(static_cast<std::uint64_t>(x.rows()));
  w.le(static_cast<std::uint64_t>(x.cols()));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) w.le(static_cast<float>(x(i, j)));
  write_bytes(path, w.bytes());
}

Features read_features(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  detail::ByteReader r(bytes);
  r.expect("OCCF", "feature file");
  const auto at = r.pos();
  if (r.le<std::uint32_t>("feature version") != 1) throw FormatError("unsupported feature file version", at);
  const auto n = r.le<std::uint64_t>("feature count");
  const auto d = r.le<std::uint64_t>("feature dimension");
  if (d == 0 || n > (1ULL << 32) || d > (1ULL << 24)) throw FormatError("invalid feature header", 8);
  r.need(n * d * 4, "feature payload");
  Features x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = r.le<float>("feature payload");
  if (r.remaining() != 0) throw FormatError("trailing bytes after feature payload", r.pos());
  if (!x.allFinite()) throw FormatError("non-finite feature values", 24);
  return x;
}

}  // namespace occsim
