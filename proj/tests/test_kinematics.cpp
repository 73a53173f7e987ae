#include <cmath>

#include "doctest.h"
#include "support.hpp"

using namespace planfactory;

namespace {

KinematicChain planar_chain(int n, const Vec3& offset, const Vec3& axis = Vec3::UnitZ()) {
  std::vector<JointSpec> joints(static_cast<std::size_t>(n));
  for (auto& j : joints) {
    j.offset = offset;
    j.axis = axis;
  }
  return KinematicChain(joints, Pose{}, JointConfig::Zero(n));
}

}  // namespace

TEST_CASE("fk of pure translations sums the offsets") {
  std::vector<JointSpec> joints(3);
  joints[0].offset = Vec3(0.1, 0, 0);
  joints[1].offset = Vec3(0, 0.2, 0);
  joints[2].offset = Vec3(0, 0, 0.3);
  Pose ee;
  ee.position = Vec3(0.05, 0.05, 0.05);
  KinematicChain chain(joints, ee, JointConfig::Zero(3));
  auto fk = forward_kinematics(chain, JointConfig::Zero(3));
  CHECK((fk.ee.translation() - Vec3(0.15, 0.25, 0.35)).norm() < 1e-15);
  CHECK(fk.links.size() == 4);
}

TEST_CASE("single revolute joint rotates the tip") {
  std::vector<JointSpec> joints(1);
  Pose ee;
  ee.position = Vec3(1, 0, 0);
  KinematicChain chain(joints, ee, JointConfig::Zero(1));
  JointConfig q(1);
  q << M_PI / 2;
  auto fk = forward_kinematics(chain, q);
  CHECK((fk.ee.translation() - Vec3(0, 1, 0)).norm() < 1e-12);
}

TEST_CASE("fk rejects wrong dimension and non-finite input") {
  auto chain = planar_chain(2, Vec3(1, 0, 0));
  CHECK_THROWS_AS(forward_kinematics(chain, JointConfig::Zero(3)), InvalidInput);
  JointConfig q = JointConfig::Zero(2);
  q[1] = std::nan("");
  CHECK_THROWS_AS(forward_kinematics(chain, q), InvalidInput);
}

TEST_CASE("chain validation") {
  std::vector<JointSpec> joints(1);
  joints[0].lower = 1.0;
  joints[0].upper = 1.0;
  CHECK_THROWS_AS(KinematicChain(joints, Pose{}, JointConfig::Zero(1)), InvalidInput);
  joints[0].lower = -1;
  joints[0].rotation = Quat(1.0, 0.001, 0, 0);
  CHECK_THROWS_AS(KinematicChain(joints, Pose{}, JointConfig::Zero(1)), InvalidInput);
  CHECK_THROWS_AS(KinematicChain::parse("[chain]\ndof = 2\n[joint]\nlimits = -1 1\n"), InvalidInput);
}

TEST_CASE("default chain matches the homogeneous-matrix oracle") {
  const auto& chain = testing::panda();
  REQUIRE(chain.dof() == 7);
  Rng rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    JointConfig q = chain.sample_uniform(rng);
    auto fk = forward_kinematics(chain, q);
    auto oracle = testing::matrix_fk(chain, q);
    for (std::size_t i = 0; i < fk.links.size(); ++i)
      REQUIRE((fk.links[i].matrix() - oracle[i]).cwiseAbs().maxCoeff() < 1e-10);
    REQUIRE((fk.ee.matrix() - oracle.back()).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("chain text round trip is exact") {
  const auto& chain = testing::panda();
  auto again = KinematicChain::parse(chain.serialize());
  CHECK(again.serialize() == chain.serialize());
  CHECK(again.hash() == chain.hash());
  Rng rng(3);
  JointConfig q = chain.sample_uniform(rng);
  CHECK(forward_kinematics(again, q).ee.matrix() == forward_kinematics(chain, q).ee.matrix());
}

TEST_CASE("ik at the generating config returns it unchanged") {
  const auto& chain = testing::panda();
  Rng rng(11);
  for (int i = 0; i < 20; ++i) {
    JointConfig q = chain.sample_uniform(rng);
    auto target = Pose::from_isometry(forward_kinematics(chain, q).ee);
    auto sol = inverse_kinematics(chain, target, q);
    REQUIRE(sol);
    CHECK(*sol == q);
  }
}

TEST_CASE("ik fails for an unreachable target") {
  const auto& chain = testing::panda();
  Pose far;
  far.position = Vec3(10, 0, 0);
  IkOptions opts;
  opts.timeout.reset();
  CHECK_FALSE(inverse_kinematics(chain, far, chain.rest(), opts));
}

TEST_CASE("ik round trip from perturbed seeds") {
  const auto& chain = testing::panda();
  Rng rng(2024);
  std::normal_distribution<double> noise(0.0, 0.05);
  IkOptions opts;
  opts.timeout.reset();
  int ok = 0;
  const int trials = 500;
  for (int t = 0; t < trials; ++t) {
    JointConfig q = chain.sample_uniform(rng);
    JointConfig seed = q;
    for (Eigen::Index i = 0; i < seed.size(); ++i) seed[i] += noise(rng);
    seed = chain.clamp(seed);
    auto target = forward_kinematics(chain, q).ee;
    auto sol = inverse_kinematics(chain, Pose::from_isometry(target), seed, opts);
    if (!sol) continue;
    REQUIRE(chain.within_limits(*sol));
    auto err = pose_error(forward_kinematics(chain, *sol).ee, target);
    REQUIRE(err.position < 1e-3);
    REQUIRE(err.orientation < 1e-2);
    ++ok;
  }
  MESSAGE("ik successes: " << ok << "/" << trials);
  CHECK(ok >= 0.95 * trials);
}

TEST_CASE("ik prefers the solution nearest the seed") {
  // Planar three-link arm: elbow-up and elbow-down reach the same full pose.
  auto arm = planar_chain(3, Vec3(1, 0, 0));
  JointConfig up(3), down(3);
  up << 0.4, -0.8, 0.3;
  down << -0.4, 0.8, -0.5;
  auto target = forward_kinematics(arm, up).ee;
  REQUIRE(pose_error(forward_kinematics(arm, down).ee, target).position < 1e-12);
  REQUIRE(pose_error(forward_kinematics(arm, down).ee, target).orientation < 1e-12);
  IkOptions opts;
  opts.timeout.reset();
  Pose t = Pose::from_isometry(target);
  JointConfig seed(3);
  seed << 0.35, -0.7, 0.25;
  auto sol = inverse_kinematics(arm, t, seed, opts);
  REQUIRE(sol);
  CHECK(inf_norm(*sol, up) < 1e-3);
  seed << -0.35, 0.7, -0.45;
  sol = inverse_kinematics(arm, t, seed, opts);
  REQUIRE(sol);
  CHECK(inf_norm(*sol, down) < 1e-3);
}

TEST_CASE("sphere placement follows link frames") {
  SUBCASE("identity chain keeps offsets") {
    auto chain = planar_chain(2, Vec3::Zero());
    SphereModel model({{0, Vec3(0.1, 0, 0), 0.05}, {2, Vec3(0, 0.2, 0.3), 0.02}});
    auto s = place_spheres(chain, model, JointConfig::Zero(2));
    CHECK(s[0].center == Vec3(0.1, 0, 0));
    CHECK(s[1].center == Vec3(0, 0.2, 0.3));
    CHECK(s[1].radius == 0.02);
  }
  SUBCASE("link rotated by pi about z") {
    auto chain = planar_chain(1, Vec3::Zero());
    SphereModel model({{1, Vec3(0.1, 0, 0.1), 0.05}});
    JointConfig q(1);
    q << M_PI;
    auto s = place_spheres(chain, model, q);
    CHECK((s[0].center - Vec3(-0.1, 0, 0.1)).norm() < 1e-12);
  }
  SUBCASE("default model against the matrix oracle") {
    const auto& chain = testing::panda();
    const auto& model = testing::panda_spheres();
    Rng rng(5);
    for (int t = 0; t < 100; ++t) {
      JointConfig q = chain.sample_uniform(rng);
      auto placed = place_spheres(chain, model, q);
      auto frames = testing::matrix_fk(chain, q);
      for (std::size_t i = 0; i < placed.size(); ++i) {
        const auto& spec = model.spheres()[i];
        Eigen::Vector4d h;
        h << spec.offset, 1.0;
        Eigen::Vector4d c = frames[static_cast<std::size_t>(spec.link)] * h;
        REQUIRE((placed[i].center - c.head<3>()).norm() < 1e-10);
        REQUIRE(placed[i].radius == spec.radius);
      }
    }
  }
}

TEST_CASE("default sphere model shape") {
  const auto& model = testing::panda_spheres();
  CHECK(model.size() == 56);
  for (const auto& s : model.spheres()) {
    CHECK(s.radius >= 0.02);
    CHECK(s.radius <= 0.10);
  }
  CHECK_NOTHROW(model.validate(testing::panda()));
  SphereModel bad({{9, Vec3::Zero(), 0.05}});
  CHECK_THROWS_AS(bad.validate(testing::panda()), InvalidInput);
  auto again = SphereModel::parse(model.serialize());
  CHECK(again.serialize() == model.serialize());
}
