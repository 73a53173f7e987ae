#include <cmath>

#include "doctest.h"
#include "planfactory/smooth.hpp"
#include "support.hpp"

using namespace planfactory;

namespace {

// Clamped cubic through (t_i, y_i) in Hermite form: unknown slopes, C2 at
// interior knots, zero slope at both ends. Dense solve, one joint at a time.
struct OracleSpline {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> y;
  std::vector<Eigen::VectorXd> slope;

  explicit OracleSpline(const std::vector<Eigen::VectorXd>& pts) {
    t.push_back(0);
    y.push_back(pts[0]);
    for (std::size_t i = 1; i < pts.size(); ++i) {
      double d = (pts[i] - y.back()).cwiseAbs().maxCoeff();
      if (d == 0) continue;
      t.push_back(t.back() + d);
      y.push_back(pts[i]);
    }
    const auto m = static_cast<Eigen::Index>(y.size());
    slope.assign(y.size(), Eigen::VectorXd::Zero(y[0].size()));
    if (m < 3) return;
    for (Eigen::Index j = 0; j < y[0].size(); ++j) {
      Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
      Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
      a(0, 0) = 1;
      a(m - 1, m - 1) = 1;
      for (Eigen::Index i = 1; i + 1 < m; ++i) {
        const auto u = static_cast<std::size_t>(i);
        double h0 = t[u] - t[u - 1], h1 = t[u + 1] - t[u];
        a(i, i - 1) = 1 / h0;
        a(i, i) = 2 / h0 + 2 / h1;
        a(i, i + 1) = 1 / h1;
        b(i) = 3 * (y[u][j] - y[u - 1][j]) / (h0 * h0) + 3 * (y[u + 1][j] - y[u][j]) / (h1 * h1);
      }
      Eigen::VectorXd s = a.fullPivLu().solve(b);
      for (Eigen::Index i = 0; i < m; ++i) slope[static_cast<std::size_t>(i)][j] = s(i);
    }
  }

  Eigen::VectorXd at(double x) const {
    if (y.size() == 1) return y[0];
    std::size_t i = 0;
    while (i + 2 < t.size() && x > t[i + 1]) ++i;
    const double h = t[i + 1] - t[i], u = (x - t[i]) / h;
    const double h00 = 2 * u * u * u - 3 * u * u + 1, h10 = u * u * u - 2 * u * u + u;
    const double h01 = -2 * u * u * u + 3 * u * u, h11 = u * u * u - u * u;
    return h00 * y[i] + h10 * h * slope[i] + h01 * y[i + 1] + h11 * h * slope[i + 1];
  }

  double end() const { return t.back(); }

  // Simpson on the ∞-norm of a central-difference velocity.
  double arc(double a, double b, int n = 4000) const {
    if (b <= a) return 0;
    auto speed = [&](double x) {
      const double e = 1e-7;
      double lo = std::max(0.0, x - e), hi = std::min(end(), x + e);
      return ((at(hi) - at(lo)) / (hi - lo)).cwiseAbs().maxCoeff();
    };
    const double h = (b - a) / n;
    double s = speed(a) + speed(b);
    for (int k = 1; k < n; ++k) s += speed(a + k * h) * (k % 2 ? 4 : 2);
    return s * h / 3;
  }

  // Parameter of the closest curve point, by scan then golden section.
  std::pair<double, double> closest(const Eigen::VectorXd& q) const {
    const int n = 20000;
    double best_t = 0, best_d = 1e300;
    for (int k = 0; k <= n; ++k) {
      double x = end() * k / n, d = (at(x) - q).norm();
      if (d < best_d) {
        best_d = d;
        best_t = x;
      }
    }
    double lo = std::max(0.0, best_t - end() / n), hi = std::min(end(), best_t + end() / n);
    const double g = (std::sqrt(5.0) - 1) / 2;
    for (int k = 0; k < 200; ++k) {
      double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
      if ((at(x1) - q).norm() < (at(x2) - q).norm()) hi = x2;
      else lo = x1;
    }
    const double x = 0.5 * (lo + hi);
    return {x, (at(x) - q).norm()};
  }
};

std::vector<JointConfig> random_path(Rng& rng, int points, double spread) {
  std::vector<JointConfig> p{snap(JointConfig(JointConfig::Random(7) * 0.5), kStorageGridBits)};
  for (int i = 1; i < points; ++i) {
    JointConfig step(7);
    for (int j = 0; j < 7; ++j) step[j] = uniform(rng, -spread, spread);
    p.push_back(snap(JointConfig(p.back() + step), kStorageGridBits));
  }
  return p;
}

JointConfig jc(std::initializer_list<double> v) {
  JointConfig q(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) q[i++] = x;
  return q;
}

}  // namespace

TEST_CASE("limits") {
  CHECK_NOTHROW(Limits::panda().validate(7));
  CHECK_THROWS_AS(Limits::panda().validate(6), InvalidInput);
  CHECK_THROWS_AS(Limits::uniform(7, 0.0, 1.0).validate(7), InvalidInput);
  CHECK(cubic_segment_duration(jc({1.0, 0.0}), Limits::uniform(2, 2.0, 6.0)) == doctest::Approx(1.0));
  CHECK(cubic_segment_duration(jc({1.0, 0.0}), Limits::uniform(2, 1.0, 600.0)) == doctest::Approx(1.5));
}

TEST_CASE("trajectory basics") {
  auto t = Trajectory::from_waypoints({jc({0, 0}), jc({0.1, -0.05}), jc({0.15, 0.0})});
  REQUIRE(t.deltas.size() == 2);
  CHECK(t.deltas[0] == jc({0.1, -0.05}));
  CHECK(t.max_step() == doctest::Approx(0.1));
  CHECK(t.cost() == doctest::Approx(0.15));
  CHECK(t.within_limits(Limits::uniform(2, 0.1, 0.2)));
  CHECK_FALSE(t.within_limits(Limits::uniform(2, 0.09, 1.0)));
  CHECK_FALSE(t.within_limits(Limits::uniform(2, 1.0, 0.04)));

  auto back = Trajectory::parse(t.to_text());
  CHECK(back.waypoints == t.waypoints);
  CHECK(back.deltas == t.deltas);
  CHECK_THROWS_AS(Trajectory::parse("0 1\n0 1 2\n"), IoError);
  CHECK_THROWS_AS(Trajectory::parse("0 x\n"), IoError);
}

TEST_CASE("spline matches the Hermite oracle") {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    auto pts = random_path(rng, 2 + trial % 6, 0.6);
    JointSpline s(pts);
    OracleSpline o(pts);
    REQUIRE(s.length_param() == doctest::Approx(o.end()));
    for (std::size_t i = 0; i < o.t.size(); ++i) CHECK((s.at(o.t[i]) - o.y[i]).norm() < 1e-12);
    for (int k = 0; k <= 50; ++k) {
      double x = o.end() * k / 50.0;
      CHECK((s.at(x) - o.at(x)).norm() < 1e-9);
    }
    CHECK(s.velocity(0).norm() < 1e-12);
    CHECK(s.velocity(s.length_param()).norm() < 1e-9);
    CHECK(s.arc_length() == doctest::Approx(o.arc(0, o.end())).epsilon(1e-6));
    double mid = 0.37 * o.end();
    CHECK(s.arc_length(mid) == doctest::Approx(o.arc(0, mid)).epsilon(1e-6));
    CHECK(s.arc_length(s.param_at_arc(0.4 * s.arc_length())) == doctest::Approx(0.4 * s.arc_length()));
  }
}

TEST_CASE("resample a straight segment") {
  JointConfig a = JointConfig::Zero(7), b = a;
  b[2] = 4.9;
  b[5] = -1.0;
  for (auto mode : {Interpolation::spline, Interpolation::linear}) {
    auto t = resample_fixed({a, b}, 50, 0.1, mode);
    REQUIRE(t.size() == 50);
    CHECK(t.waypoints.front() == a);
    CHECK(t.waypoints.back() == b);
    for (const auto& d : t.deltas) {
      CHECK(d[2] == doctest::Approx(0.1).epsilon(1e-9));
      CHECK(d[5] == doctest::Approx(-1.0 / 49).epsilon(1e-9));
    }
  }
  b[2] = 5.0;
  try {
    resample_fixed({a, b}, 50, 0.1);
    FAIL("expected PathTooLong");
  } catch (const PathTooLong& e) {
    CHECK(e.required_n == 51);
    CHECK(std::string(e.what()).find("51") != std::string::npos);
  }
  CHECK_NOTHROW(resample_fixed({a, b}, 51, 0.1));
  CHECK_THROWS_AS(resample_fixed({a, b}, 1, 0.1), InvalidInput);
  CHECK_THROWS_AS(resample_fixed({}, 50, 0.1), InvalidInput);
}

TEST_CASE("resample a single point") {
  JointConfig q = jc({0.3, -0.2, 1.0});
  for (auto path : {std::vector<JointConfig>{q}, std::vector<JointConfig>{q, q, q}}) {
    auto t = resample_fixed(path, 50);
    REQUIRE(t.size() == 50);
    for (const auto& w : t.waypoints) CHECK(w == q);
    for (const auto& d : t.deltas) CHECK(d.isZero(0));
  }
}

TEST_CASE("resampled waypoints lie on the spline at uniform arc length") {
  Rng rng(7);
  for (int trial = 0; trial < 8; ++trial) {
    auto pts = random_path(rng, 3 + trial % 4, 0.5);
    OracleSpline o(pts);
    auto t = resample_fixed(pts, 50, 1.0);
    REQUIRE(t.size() == 50);
    CHECK(t.waypoints.front() == pts.front());
    CHECK(t.waypoints.back() == pts.back());
    const double total = o.arc(0, o.end(), 20000);
    for (std::size_t k = 1; k + 1 < t.size(); k += 7) {
      auto [x, d] = o.closest(t.waypoints[k]);
      CHECK(d < 1e-9);
      CHECK(o.arc(0, x, 4000) == doctest::Approx(total * k / 49.0).epsilon(1e-5));
    }
  }
}

TEST_CASE("delta replay is exact on grid endpoints") {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    auto pts = random_path(rng, 2 + trial % 5, 0.4);
    for (auto mode : {Interpolation::spline, Interpolation::linear}) {
      Trajectory t;
      try {
        t = resample_fixed(pts, 50, 0.1, mode);
      } catch (const PathTooLong&) {
        continue;
      }
      auto replay = t.replay();
      for (std::size_t i = 0; i < t.size(); ++i) CHECK(replay[i] == t.waypoints[i]);
      CHECK(t.max_step() <= 0.1 * (1 + 1e-9));
    }
  }
}

TEST_CASE("shortcutting") {
  const auto& chain = testing::panda();
  const RobotBody body(chain, testing::panda_spheres());
  const Limits limits = Limits::panda();
  Rng rng(3);

  SUBCASE("straight path is unchanged") {
    CollisionWorld world;
    RawPath p;
    JointConfig a = chain.rest(), b = a;
    b[0] = 1.0;
    p.waypoints = {a, b};
    p.cost = 1.0;
    auto r = shortcut_spline(p, limits, world, body, rng);
    CHECK(r.waypoints == p.waypoints);
    CHECK(r.cost == 1.0);
  }

  SUBCASE("zig-zag approaches the straight line") {
    CollisionWorld world;
    for (int trial = 0; trial < 10; ++trial) {
      JointConfig a = chain.rest(), b = a;
      b[0] += 1.2;
      b[3] += 0.3;
      RawPath p;
      for (int k = 0; k <= 8; ++k) {
        JointConfig q = a + (b - a) * (k / 8.0);
        if (k % 2) q[1] += (k % 4 == 1 ? 0.3 : -0.3);
        p.waypoints.push_back(q);
      }
      p.cost = path_cost(p.waypoints);
      auto r = shortcut_spline(p, limits, world, body, rng, {200, 0.01, std::nullopt});
      CHECK(r.cost < p.cost);
      CHECK(r.cost <= 1.05 * inf_norm(a, b));
      CHECK(r.waypoints.front() == a);
      CHECK(r.waypoints.back() == b);
    }
  }

  SUBCASE("path hugging an obstacle stays clear") {
    Cuboid wall;
    wall.pose.position = Vec3(0.55, 0, 0.4);
    wall.half_extents = Vec3(0.25, 0.02, 0.4);
    CollisionWorld world(PointCloud{}, {wall});
    PlanningProblem prob;
    prob.start = chain.rest();
    prob.goal = chain.rest();
    prob.start[0] = -1.0;
    prob.goal[0] = 1.0;
    PlannerConfig pc;
    pc.budget.reset();
    pc.shortcut_iterations = 0;
    pc.restarts = 0;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      pc.seed = seed;
      auto raw = plan(prob, world, body, pc);
      REQUIRE(raw.path);
      auto r = shortcut_spline(*raw.path, limits, world, body, rng);
      CHECK(r.cost <= raw.path->cost);
      CHECK(testing::oracle_path_free(r.waypoints, world, body));

      auto sm = smooth_path(*raw.path, limits, world, body, rng);
      REQUIRE(sm);
      const auto& t = sm->trajectory;
      CHECK(t.size() == 50);
      CHECK(t.waypoints.front() == prob.start);
      CHECK(t.waypoints.back() == prob.goal);
      CHECK(t.max_step() <= 0.1 * (1 + 1e-9));
      CHECK(t.cost() <= raw.path->cost);
      CHECK(t.within_limits(limits));
      CHECK(testing::oracle_path_free(t.waypoints, world, body));
    }
  }

  SUBCASE("colliding input is rejected") {
    Cuboid block;
    block.pose.position = forward_kinematics(chain, chain.rest()).ee.translation();
    block.half_extents = Vec3::Constant(0.05);
    CollisionWorld world(PointCloud{}, {block});
    RawPath p;
    p.waypoints = {chain.rest(), chain.rest()};
    CHECK_THROWS_AS(shortcut_spline(p, limits, world, body, rng), InvalidInput);
  }
}
