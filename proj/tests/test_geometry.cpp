#include <doctest.h>

#include <cmath>
#include <set>

#include "occsim/geometry.hpp"
#include "occsim/rng.hpp"
#include "support.hpp"

using namespace occsim;

namespace {

void check_pose(const Pose2& a, const Pose2& b, double tol) {
  CHECK(std::abs(a.x - b.x) < tol);
  CHECK(std::abs(a.y - b.y) < tol);
  CHECK(std::abs(normalize_angle(a.yaw - b.yaw)) < tol);
}

FloatGrid random_grid(int w, int h, int c, std::uint64_t seed) {
  FloatGrid g(w, h, c);
  Rng rng(seed);
  for (float& v : g.values) v = static_cast<float>(rng.uniform(-1, 1));
  return g;
}

}  // namespace

TEST_CASE("pose normalization and inverse") {
  CHECK(Pose2(0, 0, 3 * M_PI).yaw == doctest::Approx(M_PI));
  CHECK(Pose2(0, 0, -M_PI).yaw == doctest::Approx(M_PI));
  Rng rng(3);
  for (int k = 0; k < 200; ++k) {
    const Pose2 p(rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-10, 10));
    CHECK(p.yaw > -M_PI);
    CHECK(p.yaw <= M_PI);
    check_pose(p.compose(p.inverse()), Pose2::identity(), 1e-9);
    const Vec2 q(rng.uniform(-5, 5), rng.uniform(-5, 5));
    CHECK((p.apply_inverse(p.apply(q)) - q).norm() < 1e-9);
  }
}

TEST_CASE("pose composition is associative") {
  Rng rng(11);
  for (int k = 0; k < 100; ++k) {
    const Pose2 a(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-4, 4));
    const Pose2 b(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-4, 4));
    const Pose2 c(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-4, 4));
    check_pose(a.compose(b).compose(c), a.compose(b.compose(c)), 1e-9);
  }
}

TEST_CASE("exp_twist closed-form cases") {
  check_pose(exp_twist({1, 0, 0}, 0.5), Pose2(0.5, 0, 0), 1e-15);
  check_pose(exp_twist({0, 0, M_PI}, 1), Pose2(0, 0, M_PI), 1e-15);
  check_pose(exp_twist({1, 0, M_PI / 2}, 1), Pose2(2 / M_PI, 2 / M_PI, M_PI / 2), 1e-12);
  CHECK_THROWS_AS(exp_twist({NAN, 0, 0}, 1), InvalidInput);
  CHECK_THROWS_AS(exp_twist({0, 0, INFINITY}, 1), InvalidInput);
}

TEST_CASE("exp_twist matches RK4 integration") {
  double worst = 0;
  for (double w : {-M_PI, -2.0, -0.5, -1e-9, 0.0, 1e-9, 0.3, 1.7, M_PI}) {
    for (double dt : {0.01, 0.25, 0.5, 1.0}) {
      for (auto [vx, vy] : {std::pair{1.0, 0.0}, {3.0, -0.5}, {-2.0, 1.5}, {0.0, 2.0}}) {
        const Pose2 e = exp_twist({vx, vy, w}, dt);
        const Pose2 r = test::rk4_twist(vx, vy, w, dt, 2000);
        worst = std::max({worst, std::abs(e.x - r.x), std::abs(e.y - r.y),
                          std::abs(normalize_angle(e.yaw - r.yaw))});
      }
    }
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("exp_twist composes over split intervals") {
  Rng rng(5);
  for (int k = 0; k < 100; ++k) {
    const Twist tw{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-3, 3)};
    const double a = rng.uniform(0, 1), b = rng.uniform(0, 1);
    check_pose(exp_twist(tw, a + b), exp_twist(tw, a).compose(exp_twist(tw, b)), 1e-7);
  }
}

TEST_CASE("warp identity is an exact copy") {
  const FloatGrid g = random_grid(17, 9, 3, 1);
  CHECK(warp_grid(g, Pose2::identity(), 0.4, Interp::bilinear) == g);
  CHECK(warp_grid(g, Pose2::identity(), 0.4, Interp::nearest) == g);
  CHECK_THROWS_AS(warp_grid(FloatGrid(0, 4, 1), Pose2(1, 0, 0), 0.4), InvalidInput);
}

TEST_CASE("warp by one voxel shifts a one-hot cell") {
  FloatGrid g(4, 4, 1);
  g.at(1, 2) = 1;
  const FloatGrid w = warp_grid(g, Pose2(0.4, 0, 0), 0.4, Interp::nearest, -1.0f);
  CHECK(w.at(2, 2) == 1.0f);
  int ones = 0;
  for (float v : w.values) ones += v == 1.0f;
  CHECK(ones == 1);
  // the column entering from outside takes the sentinel
  for (int j = 0; j < 4; ++j) CHECK(w.at(0, j) == -1.0f);
  const FloatGrid b = warp_grid(g, Pose2(0.4, 0, 0), 0.4, Interp::bilinear);
  for (int j = 0; j < 4; ++j) CHECK(b.at(0, j) == 0.0f);
}

TEST_CASE("90 degree warp equals index permutation") {
  const int n = 64;
  const FloatGrid g = random_grid(n, n, 2, 9);
  const FloatGrid w = warp_grid(g, Pose2(0, 0, M_PI / 2), 0.4, Interp::nearest);
  // source (i, j) lands at (n - 1 - j, i)
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int c = 0; c < 2; ++c) REQUIRE(w.at(n - 1 - j, i, c) == g.at(i, j, c));
}

TEST_CASE("nearest warp round trip is exact on doubly visible cells") {
  const int W = 40, H = 30;
  const double vs = 0.4;
  const FloatGrid g = random_grid(W, H, 1, 4);
  Rng rng(8);
  for (int k = 0; k < 40; ++k) {
    const Pose2 t(vs * static_cast<int>(rng.index(21)) - 4.0, vs * static_cast<int>(rng.index(21)) - 4.0,
                  M_PI / 2 * static_cast<int>(rng.index(4)));
    const FloatGrid back = warp_grid(warp_grid(g, t, vs, Interp::nearest, NAN), t.inverse(), vs,
                                     Interp::nearest, NAN);
    const Mask2D vis = visibility_mask(t.inverse(), W, H, vs);
    for (int i = 0; i < W; ++i) {
      for (int j = 0; j < H; ++j) {
        if (!vis.at(i, j) || std::isnan(back.at(i, j))) continue;
        REQUIRE(back.at(i, j) == g.at(i, j));
      }
    }
  }
}

TEST_CASE("visibility masks") {
  const int W = 64, H = 48;
  const double vs = 0.4;
  CHECK(visibility_mask(Pose2::identity(), W, H, vs).count() == static_cast<std::size_t>(W * H));
  CHECK(visibility_mask(Pose2(W * vs, 0, 0), W, H, vs).count() == 0);
  const Mask2D half = visibility_mask(Pose2(W / 2 * vs, 0, 0), W, H, vs);
  CHECK(half.count() == static_cast<std::size_t>(W / 2 * H));
  for (int i = 0; i < W; ++i) CHECK(half.at(i, 5) == (i >= W / 2 ? 1 : 0));
  const Mask2D m = visibility_mask(Pose2(3.1, -2.2, 0.7), W, H, vs);
  CHECK((m & m) == m);
}

TEST_CASE("random mask statistics") {
  CHECK(random_mask(50, 50, 0.0, 1).count() == 2500u);
  CHECK(random_mask(50, 50, 1.0, 1).count() == 0u);
  CHECK_THROWS_AS(random_mask(5, 5, 1.5, 1), InvalidInput);
  CHECK_THROWS_AS(random_mask(5, 5, -0.1, 1), InvalidInput);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const double frac = random_mask(200, 200, 0.3, seed).count() / 40000.0;
    CHECK(frac >= 0.66);
    CHECK(frac <= 0.74);
  }
  CHECK(random_mask(30, 30, 0.5, 77) == random_mask(30, 30, 0.5, 77));
  CHECK(random_mask(30, 30, 0.5, 77) != random_mask(30, 30, 0.5, 78));
}

TEST_CASE("trajectory rasterization") {
  const int W = 50, H = 50;
  const double vs = 0.4;
  auto world = [&](int i, int j) { return Vec2((i + 0.5 - W / 2.0) * vs, (j + 0.5 - H / 2.0) * vs); };

  std::vector<Vec2> one{world(7, 9)};
  const Mask2D single = rasterize_trajectory(one, W, H, vs);
  CHECK(single.count() == 1u);
  CHECK(single.at(7, 9) == 1);

  std::vector<Vec2> row{world(10, 20), world(20, 20)};
  const Mask2D line = rasterize_trajectory(row, W, H, vs);
  CHECK(line.count() == 11u);
  for (int i = 10; i <= 20; ++i) CHECK(line.at(i, 20) == 1);

  std::vector<Vec2> ell{world(5, 5), world(30, 12), world(24, 40)};
  const Mask2D l = rasterize_trajectory(ell, W, H, vs);
  const auto seg_len = [](int x0, int y0, int x1, int y1) {
    return static_cast<std::size_t>(std::max(std::abs(x1 - x0), std::abs(y1 - y0)) + 1);
  };
  CHECK(l.count() == seg_len(5, 5, 30, 12) + seg_len(30, 12, 24, 40) - 1);

  CHECK_THROWS_AS(rasterize_trajectory(std::vector<Vec2>{}, W, H, vs), InvalidInput);
}

TEST_CASE("bresenham is 8-connected and inclusive") {
  Rng rng(2);
  for (int k = 0; k < 200; ++k) {
    const int x0 = static_cast<int>(rng.index(41)) - 20, y0 = static_cast<int>(rng.index(41)) - 20;
    const int x1 = static_cast<int>(rng.index(41)) - 20, y1 = static_cast<int>(rng.index(41)) - 20;
    const auto cells = bresenham(x0, y0, x1, y1);
    REQUIRE(cells.front() == std::pair{x0, y0});
    REQUIRE(cells.back() == std::pair{x1, y1});
    CHECK(cells.size() == static_cast<std::size_t>(std::max(std::abs(x1 - x0), std::abs(y1 - y0)) + 1));
    for (std::size_t c = 1; c < cells.size(); ++c) {
      CHECK(std::max(std::abs(cells[c].first - cells[c - 1].first),
                     std::abs(cells[c].second - cells[c - 1].second)) == 1);
    }
  }
}

TEST_CASE("trajectory validation") {
  Trajectory t;
  CHECK_THROWS_AS(t.validate(), InvalidInput);
  t.samples = {{0.0, {}}, {0.5, {}}, {0.5, {}}};
  CHECK_THROWS_AS(t.validate(), InvalidInput);
  t.samples.pop_back();
  CHECK_NOTHROW(t.validate());
}
