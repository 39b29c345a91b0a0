#include <doctest.h>

#include <Eigen/QR>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "occsim/metrics.hpp"
#include "occsim/rng.hpp"
#include "support.hpp"

using namespace occsim;
using namespace occsim::test;

namespace {

Features gaussian_cloud(Rng& rng, int n, int d, double offset = 0.0, double scale = 1.0) {
  Features x(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = offset + scale * rng.normal(0.0, 1.0);
  return x;
}

double k_gauss(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b, double sigma) {
  double d2 = 0;
  for (Eigen::Index k = 0; k < a.size(); ++k) d2 += (a(k) - b(k)) * (a(k) - b(k));
  return std::exp(-d2 / (2 * sigma * sigma));
}

/// Naive U-statistic: pair form h(i, j) for equal sizes, three separate means otherwise.
double naive_mmd2(const Features& x, const Features& y, double sigma) {
  const Eigen::Index m = x.rows(), n = y.rows();
  if (m == n) {
    double s = 0;
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < m; ++j) {
        if (i == j) continue;
        s += k_gauss(x.row(i), x.row(j), sigma) + k_gauss(y.row(i), y.row(j), sigma) -
             k_gauss(x.row(i), y.row(j), sigma) - k_gauss(x.row(j), y.row(i), sigma);
      }
    return s / static_cast<double>(m * (m - 1));
  }
  double sxx = 0, syy = 0, sxy = 0;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      if (i != j) sxx += k_gauss(x.row(i), x.row(j), sigma);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) syy += k_gauss(y.row(i), y.row(j), sigma);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) sxy += k_gauss(x.row(i), y.row(j), sigma);
  return sxx / static_cast<double>(m * (m - 1)) + syy / static_cast<double>(n * (n - 1)) -
         2 * sxy / static_cast<double>(m * n);
}

OccupancyGrid labels_grid(int w, int h, const std::vector<Label>& labels) {
  OccupancyGrid g({w, h, 1}, 0.4, {}, SemanticTable::minimal(), kFree);
  std::copy(labels.begin(), labels.end(), g.labels().begin());
  return g;
}

double naive_miou(const OccupancyGrid& a, const OccupancyGrid& b) {
  double sum = 0;
  int classes = 0;
  for (int c = 0; c < 255; ++c) {
    std::size_t inter = 0, uni = 0;
    for (std::size_t v = 0; v < a.labels().size(); ++v) {
      const bool ia = a.labels()[v] == c, ib = b.labels()[v] == c;
      inter += ia && ib;
      uni += ia || ib;
    }
    if (uni == 0) continue;
    sum += static_cast<double>(inter) / static_cast<double>(uni);
    ++classes;
  }
  return classes ? sum / classes : 1.0;
}

Features permute_rows(const Features& x, const std::vector<Eigen::Index>& perm) {
  Features out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
  return out;
}

std::vector<Eigen::Index> random_perm(Rng& rng, Eigen::Index n) {
  std::vector<Eigen::Index> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  for (std::size_t k = p.size(); k > 1; --k) std::swap(p[k - 1], p[rng.index(k)]);
  return p;
}

}  // namespace

TEST_CASE("mIoU examples") {
  const auto a = labels_grid(2, 2, {kRoad, kRoad, kSidewalk, kSidewalk});
  const auto b = labels_grid(2, 2, {kRoad, kSidewalk, kSidewalk, kSidewalk});
  const IouReport r = miou(a, b);
  CHECK(r.per_class.at(kRoad) == doctest::Approx(0.5));
  CHECK(r.per_class.at(kSidewalk) == doctest::Approx(2.0 / 3.0));
  CHECK(r.mean == doctest::Approx(7.0 / 12.0).epsilon(1e-15));
  CHECK(r.per_class.size() == 2u);

  CHECK(miou(a, a).mean == 1.0);
  const auto road = labels_grid(2, 2, {kRoad, kRoad, kRoad, kRoad});
  const auto walk = labels_grid(2, 2, {kSidewalk, kSidewalk, kSidewalk, kSidewalk});
  CHECK(miou(road, walk).mean == 0.0);

  // explicit class lists and absent classes
  CHECK(miou(a, b, std::vector<Label>{kRoad}).mean == doctest::Approx(0.5));
  CHECK(miou(a, b, std::vector<Label>{kBuilding}).mean == 1.0);
  CHECK(miou(a, b, std::vector<Label>{kBuilding}).per_class.empty());

  const OccupancyGrid other({3, 2, 1}, 0.4, {}, SemanticTable::minimal(), kRoad);
  CHECK_THROWS_AS(miou(a, other), InvalidInput);
}

TEST_CASE("mIoU matches a naive count and is symmetric") {
  Rng rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Label> la(60), lb(60);
    for (auto& l : la) l = static_cast<Label>(rng.index(4));
    for (auto& l : lb) l = static_cast<Label>(rng.index(4));
    const auto a = labels_grid(10, 6, la), b = labels_grid(10, 6, lb);
    CHECK(miou(a, b).mean == doctest::Approx(naive_miou(a, b)).epsilon(1e-14));
    CHECK(miou(a, b).mean == miou(b, a).mean);
  }
}

TEST_CASE("pairwise diversity") {
  Rng rng(2);
  std::vector<OccupancyGrid> same(4, labels_grid(3, 3, {1, 1, 2, 2, 3, 3, 4, 4, 5}));
  CHECK(pairwise_diversity(same) == 0.0);

  const std::vector<OccupancyGrid> disjoint{labels_grid(2, 2, {kRoad, kRoad, kRoad, kRoad}),
                                            labels_grid(2, 2, {kSidewalk, kSidewalk, kSidewalk, kSidewalk}),
                                            labels_grid(2, 2, {kTerrain, kTerrain, kTerrain, kTerrain})};
  CHECK(pairwise_diversity(disjoint) == 1.0);

  std::vector<OccupancyGrid> three;
  for (int k = 0; k < 3; ++k) {
    std::vector<Label> l(25);
    for (auto& v : l) v = static_cast<Label>(rng.index(3));
    three.push_back(labels_grid(5, 5, l));
  }
  const double expect =
      1.0 - (naive_miou(three[0], three[1]) + naive_miou(three[0], three[2]) + naive_miou(three[1], three[2])) / 3.0;
  CHECK(pairwise_diversity(three) == doctest::Approx(expect).epsilon(1e-14));
  const double d = pairwise_diversity(three);
  CHECK(d >= 0.0);
  CHECK(d <= 1.0);

  // rollout-level value is the time mean
  const DiversityReport rep = rollout_diversity({{three[0], same[0]}, {three[1], same[1]}, {three[2], same[2]}});
  REQUIRE(rep.per_step.size() == 2u);
  CHECK(rep.per_step[0] == doctest::Approx(expect));
  CHECK(rep.per_step[1] == 0.0);
  CHECK(rep.mean == doctest::Approx(expect / 2));

  CHECK_THROWS_AS(pairwise_diversity({same[0]}), InvalidInput);
  CHECK_THROWS_AS(rollout_diversity({{same[0]}, {same[0], same[1]}}), InvalidInput);
}

TEST_CASE("Vendi score") {
  Features same(5, 3);
  for (int i = 0; i < 5; ++i) same.row(i) << 1.0, -2.0, 0.5;
  CHECK(std::abs(vendi(same) - 1.0) < 1e-9);

  Features anti(2, 4);
  anti.row(0) << 1, 2, 3, 4;
  anti.row(1) << -1, -2, -3, -4;
  CHECK(std::abs(vendi(anti) - 2.0) < 1e-9);

  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(rng.index(30));
    const Features x = gaussian_cloud(rng, n, 1 + static_cast<int>(rng.index(8)));
    const double v = vendi(x);
    CHECK(v >= 1.0 - 1e-9);
    CHECK(v <= n + 1e-9);
    // rotation and permutation invariance
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian_cloud(rng, static_cast<int>(x.cols()), static_cast<int>(x.cols())));
    const Eigen::MatrixXd rot = qr.householderQ();
    CHECK(vendi(x * rot) == doctest::Approx(v).epsilon(1e-9));
    CHECK(vendi(permute_rows(x, random_perm(rng, x.rows()))) == doctest::Approx(v).epsilon(1e-9));
    // scale does not matter after normalisation
    CHECK(vendi(3.0 * x) == doctest::Approx(v).epsilon(1e-9));
  }

  Features zero = Features::Zero(2, 3);
  zero(0, 0) = 1;
  CHECK_THROWS_AS(vendi(zero), InvalidInput);
}

TEST_CASE("MMD matches the naive double sum") {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 1 + static_cast<int>(rng.index(6));
    const int m = 2 + static_cast<int>(rng.index(30));
    const int n = trial % 2 ? m : 2 + static_cast<int>(rng.index(30));
    const Features x = gaussian_cloud(rng, m, d);
    const Features y = gaussian_cloud(rng, n, d, rng.uniform(-2, 2), rng.uniform(0.5, 2));
    const double sigma = rng.uniform(0.5, 3);
    CHECK(std::abs(mmd2(x, y, Kernel::gaussian(sigma)) - naive_mmd2(x, y, sigma)) < 1e-10);
  }
}

TEST_CASE("MMD properties") {
  Rng rng(5);
  const Features x = gaussian_cloud(rng, 40, 3);
  const Features y = gaussian_cloud(rng, 40, 3, 3.0);
  const Features z = gaussian_cloud(rng, 25, 3, 1.0);
  CHECK(std::abs(mmd2(x, x, Kernel::gaussian(1.0))) < 1e-12);
  CHECK(std::abs(mmd2(x, x, Kernel::polynomial(3, 1.0))) < 1e-12);
  CHECK(mmd2(x, y, Kernel::gaussian(1.0)) > 0.1);
  CHECK(std::abs(mmd2(x, y, Kernel::gaussian(1e6))) < 1e-9);
  CHECK(mmd2(x, z, Kernel::gaussian(1.0)) == doctest::Approx(mmd2(z, x, Kernel::gaussian(1.0))).epsilon(1e-12));

  // unequal sizes: any row order within either set
  const double base = mmd2(x, z, Kernel::gaussian(1.5));
  CHECK(mmd2(permute_rows(x, random_perm(rng, 40)), permute_rows(z, random_perm(rng, 25)), Kernel::gaussian(1.5)) ==
        doctest::Approx(base).epsilon(1e-12));
  // equal sizes: the pair order is free, the pairing itself is part of the estimator
  const auto p = random_perm(rng, 40);
  CHECK(mmd2(permute_rows(x, p), permute_rows(y, p), Kernel::gaussian(1.5)) ==
        doctest::Approx(mmd2(x, y, Kernel::gaussian(1.5))).epsilon(1e-12));

  CHECK_THROWS_AS(mmd2(x.topRows(1), y, Kernel::gaussian(1.0)), InvalidInput);
  CHECK_THROWS_AS(mmd2(x, gaussian_cloud(rng, 5, 4), Kernel::gaussian(1.0)), InvalidInput);
}

TEST_CASE("KID is MMD with the cubic polynomial kernel") {
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const Features x = gaussian_cloud(rng, 30, 8);
    const Features y = gaussian_cloud(rng, 20 + trial, 8, 0.3);
    CHECK(kid(x, y) == mmd2(x, y, Kernel::polynomial(3, 1.0)));
  }
  // kernel definition: (x.y / D + c)^d
  Eigen::RowVectorXd a(2), b(2);
  a << 1, 2;
  b << 3, -1;
  CHECK(Kernel::polynomial(3, 1.0)(a, b) == doctest::Approx(std::pow(0.5 + 1.0, 3)));
}

TEST_CASE("FID") {
  Rng rng(7);
  const Features x = gaussian_cloud(rng, 500, 4);
  const FidResult self = fid(x, x);
  CHECK(std::abs(self.value) < 1e-8);
  CHECK_FALSE(self.floored);

  const Features y = gaussian_cloud(rng, 300, 4, 0.5, 1.5);
  CHECK(fid(x, y).value == doctest::Approx(fid(y, x).value).epsilon(1e-8));
  CHECK(fid(permute_rows(x, random_perm(rng, 500)), y).value == doctest::Approx(fid(x, y).value).epsilon(1e-9));

  // offset unit Gaussians: FID -> |delta|^2
  const int N = 10000, D = 4;
  Features a = gaussian_cloud(rng, N, D);
  Features b = gaussian_cloud(rng, N, D);
  Eigen::RowVectorXd delta(D);
  delta << 1.0, -0.5, 0.75, 0.25;
  b.rowwise() += delta;
  const double expect = delta.squaredNorm();
  CHECK(std::abs(fid(a, b).value - expect) / expect < 0.05);

  // rank-deficient covariance is floored and flagged
  Features flat = gaussian_cloud(rng, 50, 3);
  flat.col(2).setZero();
  CHECK(fid(flat, x.leftCols(3)).floored);
  CHECK_THROWS_AS(fid(x.topRows(1), y), InvalidInput);
}

TEST_CASE("feature file round trip") {
  const auto dir = temp_dir("features");
  Rng rng(8);
  Features x(7, 5);
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 5; ++j) x(i, j) = static_cast<float>(rng.normal(0, 3));
  write_features(x, dir / "x.occf");
  const Features r = read_features(dir / "x.occf");
  CHECK(r == x);

  std::ifstream in(dir / "x.occf", std::ios::binary);
  std::vector<char> bytes{std::istreambuf_iterator<char>(in), {}};
  CHECK(bytes.size() == 24u + 7u * 5u * 4u);
  auto write = [&](const std::string& name, const std::vector<char>& b) {
    std::ofstream out(dir / name, std::ios::binary);
    out.write(b.data(), static_cast<std::streamsize>(b.size()));
  };
  write("short.occf", std::vector<char>(bytes.begin(), bytes.end() - 1));
  CHECK_THROWS_AS(read_features(dir / "short.occf"), FormatError);
  auto longer = bytes;
  longer.push_back(0);
  write("long.occf", longer);
  CHECK_THROWS_AS(read_features(dir / "long.occf"), FormatError);
  auto nan = bytes;
  const float q = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(nan.data() + 24, &q, 4);
  write("nan.occf", nan);
  CHECK_THROWS_AS(read_features(dir / "nan.occf"), FormatError);
  auto magic = bytes;
  magic[0] = 'X';
  write("magic.occf", magic);
  CHECK_THROWS_AS(read_features(dir / "magic.occf"), FormatError);
}
