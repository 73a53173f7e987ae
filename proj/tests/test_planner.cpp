#include <cmath>

#include "doctest.h"
#include "planfactory/planner.hpp"
#include "support.hpp"

using namespace planfactory;

namespace {

const KinematicChain& one_joint_arm() {
  static const auto chain = KinematicChain::parse(R"(
[chain]
dof = 1
ee_offset = 0.5 0 0
ee_rotation = 1 0 0 0
rest = 0

[joint]
offset = 0 0 0.1
rotation = 1 0 0 0
axis = 0 0 1
limits = -2 2
)");
  return chain;
}

const SphereModel& one_joint_spheres() {
  static const auto model = SphereModel::parse("1 0.25 0 0 0.05\n1 0.5 0 0 0.05\n");
  return model;
}

Cuboid box_at(Vec3 center, Vec3 half) {
  Cuboid c;
  c.pose.position = center;
  c.half_extents = half;
  return c;
}

// Arm swings about the base from one side of a wall to the other; the wall
// stops short of the base, leaving a gap on its near side.
struct WallProblem {
  CollisionWorld world{PointCloud{}, {box_at(Vec3(0.55, 0, 0.4), Vec3(0.25, 0.02, 0.4))}};
  PlanningProblem problem;
  WallProblem() {
    problem.start = testing::panda().rest();
    problem.goal = testing::panda().rest();
    problem.start[0] = -1.0;
    problem.goal[0] = 1.0;
  }
};

PlannerConfig unbudgeted(std::uint64_t seed) {
  PlannerConfig c;
  c.budget.reset();
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("path cost") {
  JointConfig a = JointConfig::Zero(7), b = a;
  b[3] = 0.3;
  CHECK(path_cost({a, b}) == doctest::Approx(0.3));
  CHECK(path_cost({a, a}) == 0.0);
  CHECK(path_cost({a}) == 0.0);
  CHECK(path_cost({}) == 0.0);

  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<JointConfig> path;
    for (int i = 0; i < 10; ++i) path.push_back(testing::panda().sample_uniform(rng));
    double sum = 0.0;
    for (std::size_t i = 1; i < path.size(); ++i) {
      double m = 0.0;
      for (int j = 0; j < 7; ++j) m = std::max(m, std::abs(path[i][j] - path[i - 1][j]));
      sum += m;
    }
    CHECK(path_cost(path) == sum);

    // A detour waypoint never makes the path cheaper.
    std::vector<JointConfig> detour = path;
    detour.insert(detour.begin() + 4, testing::panda().sample_uniform(rng));
    CHECK(path_cost(detour) >= path_cost(path) - 1e-12);
  }
}

TEST_CASE("planner config validation") {
  PlannerConfig c;
  CHECK_NOTHROW(c.validate());
  c.budget = std::chrono::milliseconds(0);
  CHECK_THROWS_AS(c.validate(), InvalidInput);
  c = {};
  c.goal_bias = 1.5;
  CHECK_THROWS_AS(c.validate(), InvalidInput);
  c.goal_bias = -0.1;
  CHECK_THROWS_AS(c.validate(), InvalidInput);
  c = {};
  c.step = 0;
  CHECK_THROWS_AS(c.validate(), InvalidInput);
}

TEST_CASE("empty scene gives the straight segment") {
  const RobotBody body(testing::panda(), testing::panda_spheres());
  CollisionWorld world;
  PlanningProblem p;
  p.start = testing::panda().rest();
  p.goal = p.start;
  p.goal[0] += 0.7;
  p.goal[3] += 0.4;
  auto r = plan(p, world, body, unbudgeted(1));
  REQUIRE(r.path);
  CHECK(r.path->waypoints.size() == 2);
  CHECK(r.path->waypoints.front() == p.start);
  CHECK(r.path->waypoints.back() == p.goal);
  CHECK(r.path->cost == doctest::Approx(0.7));
  CHECK_FALSE(r.path->approximate);
}

TEST_CASE("wall with a side gap") {
  const RobotBody body(testing::panda(), testing::panda_spheres());
  WallProblem w;
  REQUIRE_FALSE(testing::oracle_in_collision(w.world, body, w.problem.start));
  REQUIRE_FALSE(testing::oracle_in_collision(w.world, body, w.problem.goal));
  REQUIRE_FALSE(testing::oracle_path_free({w.problem.start, w.problem.goal}, w.world, body));

  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    auto r = plan(w.problem, w.world, body, unbudgeted(seed));
    REQUIRE(r.path);
    const auto& path = r.path->waypoints;
    CHECK(path.front() == w.problem.start);
    CHECK(path.back() == w.problem.goal);
    CHECK_FALSE(r.path->approximate);
    CHECK(testing::oracle_path_free(path, w.world, body));
    CHECK(r.path->cost == path_cost(path));
    REQUIRE_FALSE(r.cost_history.empty());
    for (std::size_t i = 1; i < r.cost_history.size(); ++i) CHECK(r.cost_history[i] <= r.cost_history[i - 1]);
    CHECK(r.cost_history.back() == r.path->cost);
  }
}

TEST_CASE("planning is a function of the seed") {
  const RobotBody body(testing::panda(), testing::panda_spheres());
  WallProblem w;
  auto a = plan(w.problem, w.world, body, unbudgeted(9));
  auto b = plan(w.problem, w.world, body, unbudgeted(9));
  REQUIRE(a.path);
  REQUIRE(b.path);
  CHECK(a.path->waypoints == b.path->waypoints);
  CHECK(a.cost_history == b.cost_history);
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("sealed goal fails") {
  const RobotBody body(one_joint_arm(), one_joint_spheres());
  CollisionWorld world(PointCloud{}, {box_at(Vec3(0.4, 0, 0.1), Vec3(0.2, 0.02, 0.1))});
  PlanningProblem p;
  p.start = JointConfig::Constant(1, -1.0);
  p.goal = JointConfig::Constant(1, 1.0);
  REQUIRE_FALSE(in_collision(world, body, p.start));
  REQUIRE_FALSE(in_collision(world, body, p.goal));

  PlannerConfig cfg = unbudgeted(0);
  cfg.max_iterations = 2000;
  auto r = plan(p, world, body, cfg);
  CHECK_FALSE(r.path);
  CHECK(r.iterations == 2000);

  SUBCASE("within a wall-clock budget") {
    cfg = {};
    cfg.budget = std::chrono::milliseconds(200);
    cfg.max_iterations = 1000000;
    auto t0 = std::chrono::steady_clock::now();
    CHECK_FALSE(plan(p, world, body, cfg).path);
    CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::seconds(2));
  }

  SUBCASE("approximate result ends short of the goal") {
    cfg.allow_approximate = true;
    auto a = plan(p, world, body, cfg);
    REQUIRE(a.path);
    CHECK(a.path->approximate);
    CHECK(a.path->waypoints.front() == p.start);
    CHECK(a.path->waypoints.back()[0] < 0.0);
    CHECK(testing::oracle_path_free(a.path->waypoints, world, body));
  }
}

TEST_CASE("colliding endpoints fail at once") {
  const RobotBody body(testing::panda(), testing::panda_spheres());
  const Vec3 ee = forward_kinematics(testing::panda(), testing::panda().rest()).ee.translation();
  CollisionWorld world(PointCloud{}, {box_at(ee, Vec3::Constant(0.05))});
  PlanningProblem p;
  p.start = testing::panda().rest();
  p.goal = p.start;
  p.goal[0] = 1.5;
  auto r = plan(p, world, body, unbudgeted(0));
  CHECK_FALSE(r.path);
  CHECK(r.iterations == 0);
}

TEST_CASE("region poses") {
  Rng rng(5);
  SamplingRegion region;
  region.box = box_at(Vec3(0.6, 0.1, 0.5), Vec3(0.1, 0.2, 0.08));
  region.box.pose.orientation = Quat(Eigen::AngleAxisd(0.7, Vec3::UnitZ()));
  for (Vec3 approach : {Vec3(1, 0, 0), Vec3(0, 0, -1), Vec3(0.6, 0.8, 0)}) {
    region.approach = approach;
    for (int i = 0; i < 200; ++i) {
      Pose p = sample_region_pose(region, rng, 0.04);
      Vec3 d = Eigen::AngleAxisd(-0.7, Vec3::UnitZ()) * (p.position - region.box.pose.position);
      CHECK(std::abs(d.x()) <= 0.06 + 1e-12);
      CHECK(std::abs(d.y()) <= 0.16 + 1e-12);
      CHECK(std::abs(d.z()) <= 0.04 + 1e-12);
      CHECK((p.orientation * Vec3::UnitZ() - approach.normalized()).norm() < 1e-9);
    }
  }
}

TEST_CASE("endpoint kind draws") {
  Rng rng(11);
  int tight = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    auto k = draw_endpoint_kinds(0.5, rng);
    tight += k.start_tight + k.goal_tight;
  }
  CHECK(static_cast<double>(tight) / (2 * n) == doctest::Approx(0.5).epsilon(0.02));
  auto never = draw_endpoint_kinds(0.0, rng);
  CHECK_FALSE(never.start_tight);
  auto always = draw_endpoint_kinds(1.0, rng);
  CHECK(always.goal_tight);
}

TEST_CASE("scene without assets gives free endpoints") {
  const auto& chain = testing::panda();
  Scene scene;
  CollisionWorld world;
  ProblemConfig cfg;
  cfg.tight_ratio = 1.0;
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    auto p = sample_problem(scene, world, chain, testing::panda_spheres(), cfg, rng);
    CHECK_FALSE(p.start_tight);
    CHECK_FALSE(p.goal_tight);
    CHECK(chain.within_limits(p.start));
    CHECK(chain.within_limits(p.goal));
  }
  CHECK_THROWS_AS(sample_problem(scene, world, chain, testing::panda_spheres(), cfg, {true, false}, rng),
                  UnsampleableScene);
}

TEST_CASE("tight endpoints land inside their regions") {
  const auto& chain = testing::panda();
  const auto& model = testing::panda_spheres();
  GenConfig gen;
  ProblemConfig cfg = ProblemConfig::from(gen);
  int solved = 0;
  for (std::uint64_t seed = 0; seed < 60 && solved < 10; ++seed) {
    Scene scene = generate_scene(gen, seed);
    if (reachable_regions(scene, chain).empty()) continue;
    CollisionWorld world = scene_world(scene);
    Rng rng(seed);
    PlanningProblem p;
    try {
      p = sample_problem(scene, world, chain, model, cfg, {true, true}, rng);
    } catch (const UnsampleableScene&) {
      continue;
    }
    ++solved;
    CHECK(p.start_tight);
    CHECK(p.goal_tight);
    const RobotBody body(chain, model, p.in_hand);
    for (const JointConfig& q : {p.start, p.goal}) {
      CHECK(chain.within_limits(q));
      const Vec3 ee = testing::matrix_fk(chain, q).back().topRightCorner<3, 1>();
      bool inside = false;
      for (const auto* r : scene.regions(true)) inside = inside || testing::box_sdf(r->box, ee) <= 1e-9;
      CHECK(inside);
      CHECK_FALSE(testing::oracle_in_collision(world, body, q));
    }
  }
  CHECK(solved >= 5);
}

TEST_CASE("sampled problems are collision-free with the held object") {
  const auto& chain = testing::panda();
  const auto& model = testing::panda_spheres();
  GenConfig gen;
  ProblemConfig cfg = ProblemConfig::from(gen);
  cfg.tight_ratio = 0.0;
  cfg.in_hand.ratio = 1.0;
  Scene scene = generate_scene(gen, 4);
  CollisionWorld world = scene_world(scene);
  Rng rng(4);
  for (int i = 0; i < 10; ++i) {
    auto p = sample_problem(scene, world, chain, model, cfg, rng);
    REQUIRE(p.in_hand);
    const RobotBody body(chain, model, p.in_hand);
    CHECK_FALSE(testing::oracle_in_collision(world, body, p.start));
    CHECK_FALSE(testing::oracle_in_collision(world, body, p.goal));
  }
}

TEST_CASE("reach bound") {
  const auto& chain = testing::panda();
  auto [pivot, reach] = reach_bound(chain);
  Rng rng(8);
  for (int i = 0; i < 2000; ++i) {
    const JointConfig q = chain.sample_uniform(rng);
    const Vec3 ee = testing::matrix_fk(chain, q).back().topRightCorner<3, 1>();
    CHECK((ee - pivot).norm() <= reach + 1e-9);
  }
}
