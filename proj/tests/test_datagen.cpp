#include <algorithm>
#include <numeric>
#include <set>

#include "doctest.h"
#include "planfactory/binary_io.hpp"
#include "planfactory/datagen.hpp"
#include "support.hpp"

using namespace planfactory;

namespace {

// Sphere centers at q by 4×4 products.
std::vector<std::pair<Vec3, double>> oracle_spheres(const KinematicChain& chain, const SphereModel& model,
                                                    const JointConfig& q) {
  const auto frames = testing::matrix_fk(chain, q);
  std::vector<std::pair<Vec3, double>> out;
  for (const auto& s : model.spheres())
    out.emplace_back((frames[static_cast<std::size_t>(s.link)] * s.offset.homogeneous()).head<3>(), s.radius);
  return out;
}

Vec3 oracle_ee(const KinematicChain& chain, const JointConfig& q) {
  return testing::matrix_fk(chain, q).back().topRightCorner<3, 1>();
}

double oracle_surface_distance(const std::vector<std::pair<Vec3, double>>& spheres, const Vec3& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [c, r] : spheres) best = std::min(best, std::abs((p - c).norm() - r));
  return best;
}

double oracle_robot_sdf(const std::vector<std::pair<Vec3, double>>& spheres, const Vec3& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [c, r] : spheres) best = std::min(best, (p - c).norm() - r);
  return best;
}

JointConfig grid_config(const KinematicChain& chain, Rng& rng) {
  return snap(chain.clamp(chain.sample_uniform(rng) * 0.9), kStorageGridBits);
}

// Straight joint-space trajectory on the storage grid.
Trajectory line(const JointConfig& a, const JointConfig& b, int n) {
  std::vector<JointConfig> w;
  for (int i = 0; i < n; ++i) w.push_back(snap(a + (b - a) * (static_cast<double>(i) / (n - 1)), kStorageGridBits));
  w.front() = a;
  w.back() = b;
  return Trajectory::from_waypoints(std::move(w));
}

DatasetRecord synthetic_record(const KinematicChain& chain, std::uint64_t seed) {
  Rng rng(seed);
  DatasetRecord r;
  r.seed = seed;
  r.scene_seed = seed + 1000;
  r.problem.start = grid_config(chain, rng);
  r.problem.goal = grid_config(chain, rng);
  r.trajectory = line(r.problem.start, r.problem.goal, 6);
  return r;
}

const FactoryConfig& small_config() {
  static const FactoryConfig cfg = [] {
    FactoryConfig c;
    c.reverse = true;
    c.relabel = true;
    c.workers = 1;
    return c;
  }();
  return cfg;
}

const FactoryOutput& small_run() {
  static const FactoryOutput out =
      run_factory(small_config(), testing::panda(), testing::panda_spheres(), {11, 12, 13, 14});
  return out;
}

struct SceneObs {
  Scene scene;
  PointCloud obstacles;
};

SceneObs scene_obs(std::uint64_t seed) {
  SceneObs s{generate_scene(GenConfig(), seed), {}};
  s.obstacles = scene_obstacle_cloud(s.scene, ObservationOptions{}, derive_seed(seed, 3));
  return s;
}

}  // namespace

TEST_CASE("robot cloud lies on the sphere model surface at q") {
  const auto& chain = testing::panda();
  const auto& model = testing::panda_spheres();
  Rng rng(3);
  const JointConfig q = chain.sample_uniform(rng);
  const RobotBody body(chain, model);
  const auto cloud = sample_robot_cloud(body, q, 2048, 77, PointLabel::robot);
  REQUIRE(cloud.size() == 2048);
  CHECK(cloud.count(PointLabel::robot) == 2048);
  const auto spheres = oracle_spheres(chain, model, q);
  std::size_t buried = 0;
  for (const auto& p : cloud.points) {
    CHECK(oracle_surface_distance(spheres, p) < 1e-9);
    if (oracle_robot_sdf(spheres, p) < -1e-9) ++buried;
  }
  // Rejection can give up on a fully covered sphere; that must stay rare.
  CHECK(buried <= 20);

  SUBCASE("deterministic in the seed") {
    const auto again = sample_robot_cloud(body, q, 2048, 77, PointLabel::robot);
    CHECK(again.points == cloud.points);
    const auto other = sample_robot_cloud(body, q, 2048, 78, PointLabel::robot);
    CHECK(other.points != cloud.points);
  }

  SUBCASE("held object points sit on the object and carry their label") {
    InHandObject obj = make_in_hand_object(InHandPrimitive::box, Vec3(0.1, 0.06, 0.2));
    obj.grasp.position = Vec3(0.01, -0.02, 0.03);
    const RobotBody holding(chain, model, obj);
    const auto c = sample_robot_cloud(holding, q, 2048, 5, PointLabel::robot);
    CHECK(c.size() == 2048);
    CHECK(c.count(PointLabel::in_hand) > 0);
    CHECK(c.count(PointLabel::robot) + c.count(PointLabel::in_hand) == 2048);
    const Eigen::Matrix4d ee = testing::matrix_fk(chain, q).back();
    const Eigen::Matrix4d grasp = testing::homogeneous(Eigen::Matrix3d::Identity(), obj.grasp.position);
    const Eigen::Matrix4d inv = (ee * grasp).inverse();
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (c.labels[i] != PointLabel::in_hand) continue;
      const Vec3 local = (inv * c.points[i].homogeneous()).head<3>();
      CHECK(std::abs(testing::box_sdf(Cuboid{0.5 * obj.dims, Pose{}}, local)) < 1e-9);
    }
    const auto goal = sample_robot_cloud(holding, q, 2048, 5, PointLabel::goal_robot);
    CHECK(goal.count(PointLabel::goal_robot) == 2048);
  }
}

TEST_CASE("assembled observations") {
  const auto& chain = testing::panda();
  const auto& model = testing::panda_spheres();
  const auto so = scene_obs(21);
  const ObservationContext ctx{chain, model, so.obstacles, ObservationOptions{}};
  Rng rng(8);
  const JointConfig q0 = grid_config(chain, rng);
  const JointConfig g = grid_config(chain, rng);
  const auto obs = assemble_observation(ctx, q0, g, std::nullopt, 99);

  SUBCASE("label counts") {
    CHECK(obs.count(PointLabel::robot) == 2048);
    CHECK(obs.count(PointLabel::goal_robot) == 2048);
    CHECK(obs.count(PointLabel::obstacle) <= 4096);
    CHECK(obs.count(PointLabel::obstacle) > 0);
    CHECK(obs.count(PointLabel::in_hand) == 0);
    obs.validate();
  }

  SUBCASE("no obstacle point inside the robot at q0 beyond eps") {
    const auto spheres = oracle_spheres(chain, model, q0);
    for (std::size_t i = 0; i < obs.size(); ++i)
      if (obs.labels[i] == PointLabel::obstacle) CHECK(oracle_robot_sdf(spheres, obs.points[i]) >= 0.01 - 1e-6);
  }

  SUBCASE("goal cloud follows the goal configuration") {
    const auto spheres = oracle_spheres(chain, model, g);
    for (std::size_t i = 0; i < obs.size(); ++i)
      if (obs.labels[i] == PointLabel::goal_robot) CHECK(oracle_surface_distance(spheres, obs.points[i]) < 1e-6);
  }

  SUBCASE("q0 == g gives two samplings of the same surface") {
    const auto same = assemble_observation(ctx, q0, q0, std::nullopt, 99);
    const auto spheres = oracle_spheres(chain, model, q0);
    for (std::size_t i = 0; i < same.size(); ++i)
      if (same.labels[i] != PointLabel::obstacle) CHECK(oracle_surface_distance(spheres, same.points[i]) < 1e-6);
  }

  SUBCASE("values are float32") {
    for (const auto& p : obs.points)
      for (int k = 0; k < 3; ++k) CHECK(static_cast<double>(static_cast<float>(p[k])) == p[k]);
  }

  SUBCASE("empty obstacle cloud is allowed") {
    const PointCloud none;
    const ObservationContext bare{chain, model, none, ObservationOptions{}};
    const auto o = assemble_observation(bare, q0, g, std::nullopt, 1);
    CHECK(o.count(PointLabel::obstacle) == 0);
    CHECK(o.size() == 4096);
  }
}

TEST_CASE("hindsight relabeling") {
  const auto& chain = testing::panda();
  const auto& model = testing::panda_spheres();
  const PointCloud none;
  const ObservationContext ctx{chain, model, none, ObservationOptions{}};
  DatasetRecord r = synthetic_record(chain, 4);
  r.observation = assemble_observation(ctx, r.problem.start, r.problem.goal, std::nullopt, r.seed);

  SUBCASE("exact records are untouched") {
    CHECK(relabel_hindsight(r, ctx) == r);
  }

  SUBCASE("approximate records get the reached goal") {
    Rng rng(5);
    r.problem.goal = grid_config(chain, rng);  // never reached
    r.approximate = true;
    const auto out = relabel_hindsight(r, ctx);
    CHECK(out.relabeled);
    CHECK(out.tag() == "relabeled");
    CHECK(out.problem.goal == r.trajectory.waypoints.back());
    CHECK(out.trajectory.waypoints == r.trajectory.waypoints);
    const auto spheres = oracle_spheres(chain, model, r.trajectory.waypoints.back());
    std::size_t goal_points = 0;
    for (std::size_t i = 0; i < out.observation.size(); ++i)
      if (out.observation.labels[i] == PointLabel::goal_robot) {
        ++goal_points;
        CHECK(oracle_surface_distance(spheres, out.observation.points[i]) < 1e-6);
      }
    CHECK(goal_points == 2048);
  }
}

TEST_CASE("reversal") {
  const auto& chain = testing::panda();
  const auto& model = testing::panda_spheres();
  const PointCloud none;
  const ObservationContext ctx{chain, model, none, ObservationOptions{}};
  DatasetRecord r = synthetic_record(chain, 9);
  r.problem.start_tight = true;
  r.observation = assemble_observation(ctx, r.problem.start, r.problem.goal, std::nullopt, r.seed);

  SUBCASE("reverse of reverse is the original") {
    const auto rev = reverse_augment(r, ctx);
    CHECK(rev.tag() == "reversed");
    CHECK(rev.problem.start == r.problem.goal);
    CHECK(rev.problem.goal == r.problem.start);
    CHECK(rev.problem.goal_tight);
    CHECK_FALSE(rev.problem.start_tight);
    const std::size_t n = r.trajectory.size();
    for (std::size_t i = 0; i + 1 < n; ++i) CHECK(rev.trajectory.deltas[i] == -r.trajectory.deltas[n - 2 - i]);
    CHECK(reverse_augment(rev, ctx) == r);
  }

  SUBCASE("palindromes reverse onto themselves") {
    Rng rng(2);
    const JointConfig a = grid_config(chain, rng), b = grid_config(chain, rng);
    DatasetRecord p = r;
    p.problem.start = p.problem.goal = a;
    p.trajectory = Trajectory::from_waypoints({a, b, a});
    CHECK(reverse_augment(p, ctx).trajectory.waypoints == p.trajectory.waypoints);
  }
}

TEST_CASE("length outliers against a hand computation") {
  SUBCASE("equal lengths prune nothing") {
    CHECK(length_outliers(std::vector<double>(10, 2.5), 2.0).empty());
  }
  SUBCASE("one long record among 99 short ones") {
    std::vector<double> lengths(99, 1.0);
    lengths.insert(lengths.begin() + 37, 10.0);
    FilterStats st;
    const auto out = length_outliers(lengths, 2.0, &st);
    REQUIRE(out.size() == 1);
    CHECK(out[0] == 37);
    // mean = 1.09, variance = (99·0.09² + 8.91²) / 100 = 0.8019
    CHECK(st.mean_length == doctest::Approx(1.09).epsilon(1e-12));
    CHECK(st.std_length == doctest::Approx(std::sqrt(0.8019)).epsilon(1e-12));
    CHECK(st.length_threshold == doctest::Approx(1.09 + 2 * std::sqrt(0.8019)).epsilon(1e-12));
  }
  SUBCASE("one-sided") {
    std::vector<double> lengths(99, 1.0);
    lengths.push_back(0.001);
    CHECK(length_outliers(lengths, 2.0).empty());
  }
  SUBCASE("needs two records") {
    CHECK_THROWS_AS(length_outliers({1.0}, 2.0), InvalidInput);
  }
  SUBCASE("order does not matter") {
    Rng rng(6);
    std::vector<double> lengths;
    for (int i = 0; i < 300; ++i) lengths.push_back(std::exp(uniform(rng, -1.0, 1.5)));
    std::vector<double> pruned;
    for (auto i : length_outliers(lengths, 2.0)) pruned.push_back(lengths[i]);
    CHECK_FALSE(pruned.empty());
    for (int trial = 0; trial < 5; ++trial) {
      std::shuffle(lengths.begin(), lengths.end(), rng);
      std::vector<double> again;
      for (auto i : length_outliers(lengths, 2.0)) again.push_back(lengths[i]);
      std::sort(again.begin(), again.end());
      std::sort(pruned.begin(), pruned.end());
      CHECK(again == pruned);
    }
  }
}

TEST_CASE("length filter on records uses end-effector travel") {
  const auto& chain = testing::panda();
  std::vector<DatasetRecord> records;
  for (std::uint64_t s = 0; s < 40; ++s) {
    DatasetRecord r = synthetic_record(chain, 100 + s);
    r.trajectory = line(r.problem.start, r.problem.start, 3);  // zero travel
    r.problem.goal = r.problem.start;
    records.push_back(r);
  }
  records[17] = synthetic_record(chain, 7);
  double oracle = 0.0;
  for (std::size_t i = 1; i < records[17].trajectory.size(); ++i)
    oracle += (oracle_ee(chain, records[17].trajectory.waypoints[i]) -
               oracle_ee(chain, records[17].trajectory.waypoints[i - 1]))
                  .norm();
  CHECK(task_space_length(chain, records[17].trajectory) == doctest::Approx(oracle).epsilon(1e-10));
  const auto res = filter_length(records, chain);
  REQUIRE(res.pruned.size() == 1);
  CHECK(res.pruned[0].seed == 7);
  CHECK(res.pruned[0].status == FilterStatus::length);
  CHECK(res.kept.size() == 39);
  CHECK(res.stats.pruned_length == 1);
}

TEST_CASE("workspace filter agrees with per-waypoint forward kinematics") {
  const auto& chain = testing::panda();
  const WorkspaceBox box{Vec3(-0.6, -0.6, 0.0), Vec3(0.8, 0.6, 1.2)};
  std::vector<DatasetRecord> records;
  for (std::uint64_t s = 0; s < 1000; ++s) records.push_back(synthetic_record(chain, 5000 + s));
  std::set<std::uint64_t> expected;
  for (const auto& r : records)
    for (const auto& q : r.trajectory.waypoints) {
      const Vec3 p = oracle_ee(chain, q);
      if ((p.array() < box.min.array()).any() || (p.array() > box.max.array()).any()) {
        expected.insert(r.seed);
        break;
      }
    }
  const auto res = filter_workspace(records, chain, box);
  std::set<std::uint64_t> got;
  for (const auto& r : res.pruned) got.insert(r.seed);
  CHECK(got == expected);
  CHECK(res.kept.size() + res.pruned.size() == 1000);
  CHECK(res.stats.pruned_workspace == expected.size());
  CHECK(expected.size() > 50);
  CHECK(expected.size() < 950);

  SUBCASE("boundary") {
    const DatasetRecord r = synthetic_record(chain, 3);
    WorkspaceBox tight{Vec3::Constant(1e9), Vec3::Constant(-1e9)};
    for (const auto& q : r.trajectory.waypoints) {
      const Vec3 p = forward_kinematics(chain, q).ee.translation();
      tight.min = tight.min.cwiseMin(p);
      tight.max = tight.max.cwiseMax(p);
    }
    CHECK(filter_workspace({r}, chain, tight).kept.size() == 1);
    WorkspaceBox short_box = tight;
    short_box.max.x() -= 0.001;
    CHECK(filter_workspace({r}, chain, short_box).pruned.size() == 1);
    CHECK_THROWS_AS(filter_workspace({r}, chain, WorkspaceBox{}), InvalidInput);
  }
}

TEST_CASE("filters applied in order keep record order") {
  const auto& chain = testing::panda();
  std::vector<DatasetRecord> records;
  for (std::uint64_t s = 0; s < 200; ++s) records.push_back(synthetic_record(chain, 900 + s));
  const WorkspaceBox box{Vec3(-0.6, -0.6, 0.0), Vec3(0.8, 0.6, 1.2)};
  FilterStats st;
  const auto out = apply_filters(records, chain, box, st);
  REQUIRE(out.size() == records.size());
  const auto by_length = filter_length(records, chain);
  const auto then_ws = filter_workspace(by_length.kept, chain, box);
  std::size_t kept = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(out[i].seed == records[i].seed);
    kept += out[i].status == FilterStatus::kept;
  }
  CHECK(st.pruned_length == by_length.pruned.size());
  CHECK(st.pruned_workspace == then_ws.pruned.size());
  CHECK(kept == then_ws.kept.size());
  CHECK(st.pruned() + kept == records.size());
}

TEST_CASE("dataset encoding") {
  const auto& chain = testing::panda();
  const auto& model = testing::panda_spheres();
  const PointCloud none;
  const ObservationContext ctx{chain, model, none, ObservationOptions{}};
  std::vector<DatasetRecord> records;
  for (std::uint64_t s = 0; s < 4; ++s) {
    DatasetRecord r = synthetic_record(chain, 40 + s);
    if (s % 2) {
      InHandObject obj = make_in_hand_object(static_cast<InHandPrimitive>(s), Vec3(0.11, 0.07, 0.13));
      obj.grasp.position = Vec3(0.01, 0.02, 0.03);
      obj.grasp.orientation = Quat(Eigen::AngleAxisd(0.3, Vec3::UnitZ()));
      r.problem.in_hand = obj;
    }
    r.observation = assemble_observation(ctx, r.problem.start, r.problem.goal, r.problem.in_hand, r.seed);
    r.status = static_cast<FilterStatus>(s % 3);
    round_for_storage(r);
    records.push_back(r);
  }
  const std::string bytes = encode_dataset(chain, records);
  const Dataset back = decode_dataset(bytes);
  CHECK(back.header.dof == 7);
  CHECK(back.header.chain_hash == chain.hash());
  CHECK(back.header.records == 4);
  CHECK(back.header.kept == 2);
  CHECK(back.header.pruned_length == 1);
  CHECK(back.header.pruned_workspace == 1);
  REQUIRE(back.records.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(back.records[i] == records[i]);
  CHECK(encode_dataset(chain, back.records) == bytes);

  SUBCASE("corrupt input") {
    CHECK_THROWS_AS(decode_dataset("NOPE"), IoError);
    CHECK_THROWS_AS(decode_dataset(std::string_view(bytes).substr(0, bytes.size() - 3)), IoError);
    CHECK_THROWS_AS(decode_dataset(bytes + "x"), IoError);
    std::string bad = bytes;
    bad[4] = 9;  // version
    CHECK_THROWS_AS(decode_dataset(bad), IoError);
  }

  SUBCASE("off-grid joint values are refused") {
    DatasetRecord r = records[0];
    r.trajectory.waypoints[2][0] += 1e-9;
    CHECK_THROWS_AS(round_for_storage(r), InvalidInput);
  }
}

TEST_CASE("factory configuration round trip") {
  const std::string text = R"(
[Factory]
reverse = true
relabel = yes
trajectory length = 40
planner budget = 3 s
workspace box = [-1, -1, 0, 1, 1, 1.4]
velocity limits = [1, 2, 3, 4, 5, 6, 7]
acceleration limits = [1, 2, 3, 4, 5, 6, 7]
)";
  const auto cfg = FactoryConfig::parse(text);
  CHECK(cfg.reverse);
  CHECK(cfg.relabel);
  CHECK(cfg.smoothing.n == 40);
  REQUIRE(cfg.planner.budget);
  CHECK(cfg.planner.budget->count() == 3000);
  CHECK(cfg.workspace.max.z() == 1.4);
  CHECK(cfg.limits.max_velocity[6] == 7);
  const auto again = FactoryConfig::parse(cfg.dump());
  CHECK(again.dump() == cfg.dump());
  CHECK(FactoryConfig().dump() == FactoryConfig::parse(FactoryConfig().dump()).dump());
  CHECK_FALSE(FactoryConfig().planner.budget.has_value());

  CHECK_THROWS_AS(FactoryConfig::parse("[Factory]\nspeed = 3\n"), InvalidInput);
  CHECK_THROWS_AS(FactoryConfig::parse("[Factory]\nreverse = maybe\n"), InvalidInput);
  CHECK_THROWS_AS(FactoryConfig::parse("[Factory]\nworkspace box = [1, 1, 1, 0, 0, 0]\n"), InvalidInput);
  CHECK_THROWS_AS(FactoryConfig::parse("[Factory]\ntrajectory length = 1\n"), InvalidInput);

  const auto aug = FactoryConfig::parse("[Depth Augmentation]\nhole threshold = [0.6, 0.9]\nblur kernel = [5, 9]\n");
  CHECK(aug.augment.hole_threshold_min == 0.6);
  CHECK(aug.augment.blur_kernel_max == 9);
  CHECK(FactoryConfig::parse(aug.dump()).augment.hole_threshold_min == 0.6);
  CHECK_THROWS_AS(FactoryConfig::parse("[Depth Augmentation]\nblur kernel = [4, 9]\n"), InvalidInput);
  CHECK_THROWS_AS(FactoryConfig::parse("[Depth Augmentation]\nhole threshold = [0.9, 0.6]\n"), InvalidInput);
  CHECK_THROWS_AS(FactoryConfig::parse("[Depth Augmentation]\nsparkle = 1\n"), InvalidInput);
}

TEST_CASE("shipped default config") {
  const auto cfg = FactoryConfig::load(std::string(PLANFACTORY_DATA_DIR) + "/default.cfg");
  CHECK(cfg.dump() == FactoryConfig().dump());
}

TEST_CASE("factory output") {
  const auto& chain = testing::panda();
  const auto& model = testing::panda_spheres();
  const auto& out = small_run();
  std::size_t produced = 0;
  for (const auto& log : out.logs) produced += log.produced;
  CHECK(produced >= 3);
  CHECK(out.records.size() == 2 * produced);
  CHECK(out.stats.records == out.records.size());

  SUBCASE("record invariants") {
    for (const auto& r : out.records) {
      const auto& w = r.trajectory.waypoints;
      REQUIRE(w.size() == 50);
      CHECK(w.front() == r.problem.start);
      CHECK(w.back() == r.problem.goal);
      CHECK(r.trajectory.max_step() <= 0.1);
      JointConfig q = w.front();
      for (std::size_t t = 0; t + 1 < w.size(); ++t) {
        q += r.trajectory.deltas[t];
        CHECK(q == w[t + 1]);
      }
      CHECK(r.observation.count(PointLabel::robot) + r.observation.count(PointLabel::in_hand) == 2048);
      CHECK(r.observation.count(PointLabel::goal_robot) == 2048);
      CHECK(r.observation.count(PointLabel::obstacle) <= 4096);
    }
  }

  SUBCASE("reversed records mirror their expert record") {
    for (std::size_t i = 0; i + 1 < out.records.size(); i += 2) {
      const auto& a = out.records[i];
      const auto& b = out.records[i + 1];
      CHECK(a.tag() != "reversed");
      CHECK(b.tag() == "reversed");
      CHECK(a.seed == b.seed);
      CHECK(a.problem.start == b.problem.goal);
    }
  }

  SUBCASE("persisted trajectories pass an independent audit") {
    for (std::size_t i = 0; i < 2 && i < out.records.size(); ++i) {
      const auto& r = out.records[i];
      const Scene scene = generate_scene(small_config().scenes, r.scene_seed);
      const RobotBody body(chain, model, r.problem.in_hand);
      CHECK(testing::oracle_path_free(r.trajectory.waypoints, scene_world(scene), body));
    }
  }

  SUBCASE("file round trip and recount") {
    const Dataset back = decode_dataset(encode_dataset(chain, out.records));
    REQUIRE(back.records.size() == out.records.size());
    for (std::size_t i = 0; i < back.records.size(); ++i) CHECK(back.records[i] == out.records[i]);
    const auto summary = summarize(back, chain, small_config().workspace);
    CHECK(summary.pruned_length == out.stats.filters.pruned_length);
    CHECK(summary.pruned_workspace == out.stats.filters.pruned_workspace);
    CHECK(summary.recount_length == out.stats.filters.pruned_length);
    CHECK(summary.recount_workspace == out.stats.filters.pruned_workspace);
    CHECK(summary.kept == out.stats.kept);
    CHECK(summary.by_tag.count("reversed"));
  }

  SUBCASE("sidecar has a summary line and one line per record") {
    const auto text = sidecar_text(out.stats, out.records, chain);
    CHECK(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) == out.records.size() + 1);
    CHECK(text.rfind("{", 0) == 0);
  }
}

TEST_CASE("factory reruns are byte-identical whatever the worker count") {
  const auto& chain = testing::panda();
  const auto& model = testing::panda_spheres();
  FactoryConfig cfg = small_config();
  cfg.workers = 3;
  const auto again = run_factory(cfg, chain, model, {11, 12, 13, 14});
  CHECK(encode_dataset(chain, again.records) == encode_dataset(chain, small_run().records));
  CHECK(sidecar_text(again.stats, again.records, chain) ==
        sidecar_text(small_run().stats, small_run().records, chain));
}

TEST_CASE("empty dataset summary is zero") {
  const Dataset empty = decode_dataset(encode_dataset(testing::panda(), {}));
  const auto s = summarize(empty, testing::panda(), FactoryConfig().workspace);
  CHECK(s.records == 0);
  CHECK(s.kept == 0);
  CHECK(s.tight_fraction == 0.0);
  CHECK(s.lengths.empty());
}
