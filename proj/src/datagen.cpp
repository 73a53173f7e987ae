#include "planfactory/datagen.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include <omp.h>

#include <json.hpp>

#include "planfactory/binary_io.hpp"
#include "planfactory/config.hpp"

namespace planfactory {

namespace {

constexpr char kMagic[4] = {'N', 'M', 'P', 'D'};
constexpr const char* kFactorySection = "Factory";
constexpr const char* kAugmentSection = "Depth Augmentation";

double in_hand_area(const InHandObject& obj) {
  const Vec3& d = obj.dims;
  switch (obj.primitive) {
    case InHandPrimitive::box:
      return 2.0 * (d.x() * d.y() + d.y() * d.z() + d.z() * d.x());
    case InHandPrimitive::cylinder:
      return M_PI * d.x() * d.z() + 0.5 * M_PI * d.x() * d.x();
    case InHandPrimitive::sphere:
      return M_PI * d.x() * d.x();
    case InHandPrimitive::mesh:
      return obj.mesh ? obj.mesh->surface_area() : 0.0;
  }
  return 0.0;
}

bool same_in_hand(const std::optional<InHandObject>& a, const std::optional<InHandObject>& b) {
  if (a.has_value() != b.has_value()) return false;
  if (!a) return true;
  return a->primitive == b->primitive && a->dims == b->dims && a->grasp.position == b->grasp.position &&
         a->grasp.orientation.coeffs() == b->grasp.orientation.coeffs() && a->mesh.has_value() == b->mesh.has_value();
}

bool same_cloud(const PointCloud& a, const PointCloud& b) {
  return a.points.size() == b.points.size() && a.labels == b.labels &&
         std::equal(a.points.begin(), a.points.end(), b.points.begin(),
                    [](const Vec3& x, const Vec3& y) { return x == y; });
}

bool same_configs(const std::vector<JointConfig>& a, const std::vector<JointConfig>& b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](const JointConfig& x, const JointConfig& y) {
           return x.size() == y.size() && x == y;
         });
}

// volatile: g++ 11 at -O3 drops this round trip when it vectorizes neighbouring lanes.
double to_float(double v) {
  volatile float f = static_cast<float>(v);
  return static_cast<double>(f);
}

void put_config(ByteWriter& w, const JointConfig& q) {
  for (Eigen::Index i = 0; i < q.size(); ++i) w.put_f32(q[i]);
}

JointConfig get_config(ByteReader& r, std::size_t dof) {
  JointConfig q(static_cast<Eigen::Index>(dof));
  for (std::size_t i = 0; i < dof; ++i) q[static_cast<Eigen::Index>(i)] = r.get_f32();
  return q;
}

std::uint8_t pack_flags(const DatasetRecord& r) {
  return static_cast<std::uint8_t>((r.reversed ? 1 : 0) | (r.relabeled ? 2 : 0) | (r.approximate ? 4 : 0) |
                                   (r.problem.start_tight ? 8 : 0) | (r.problem.goal_tight ? 16 : 0));
}

std::string encode_record(const DatasetRecord& r, std::size_t dof) {
  ByteWriter w;
  w.put(r.seed);
  w.put(r.scene_seed);
  w.put(pack_flags(r));
  w.put(static_cast<std::uint8_t>(r.status));
  const auto& traj = r.trajectory;
  if (traj.deltas.size() + 1 != traj.waypoints.size() && !traj.waypoints.empty())
    throw InvalidInput("trajectory deltas do not match its waypoints");
  w.put(static_cast<std::uint32_t>(traj.waypoints.size()));
  for (const auto& q : traj.waypoints) {
    if (static_cast<std::size_t>(q.size()) != dof) throw InvalidInput("waypoint has the wrong dof");
    put_config(w, q);
  }
  for (const auto& d : traj.deltas) put_config(w, d);
  put_config(w, r.problem.start);
  put_config(w, r.problem.goal);
  w.put(static_cast<std::uint8_t>(r.problem.in_hand ? 1 : 0));
  if (r.problem.in_hand) {
    const auto& obj = *r.problem.in_hand;
    w.put(static_cast<std::uint8_t>(obj.primitive));
    for (int i = 0; i < 3; ++i) w.put_f32(obj.dims[i]);
    for (int i = 0; i < 3; ++i) w.put_f32(obj.grasp.position[i]);
    w.put_f32(obj.grasp.orientation.w());
    w.put_f32(obj.grasp.orientation.x());
    w.put_f32(obj.grasp.orientation.y());
    w.put_f32(obj.grasp.orientation.z());
  }
  w.put_string(encode_cloud(r.observation));
  return w.take();
}

DatasetRecord decode_record(std::string_view bytes, std::size_t dof) {
  ByteReader r(bytes);
  DatasetRecord rec;
  rec.seed = r.get<std::uint64_t>();
  rec.scene_seed = r.get<std::uint64_t>();
  const auto flags = r.get<std::uint8_t>();
  if (flags >= 32) throw IoError("dataset record has unknown flags");
  rec.reversed = flags & 1;
  rec.relabeled = flags & 2;
  rec.approximate = flags & 4;
  rec.problem.start_tight = flags & 8;
  rec.problem.goal_tight = flags & 16;
  const auto status = r.get<std::uint8_t>();
  if (status > 2) throw IoError("dataset record has an unknown filter status");
  rec.status = static_cast<FilterStatus>(status);
  const auto n = r.get<std::uint32_t>();
  if (static_cast<std::size_t>(n) * dof * 8 > r.remaining()) throw IoError("dataset record is truncated");
  for (std::uint32_t i = 0; i < n; ++i) rec.trajectory.waypoints.push_back(get_config(r, dof));
  for (std::uint32_t i = 0; i + 1 < n; ++i) rec.trajectory.deltas.push_back(get_config(r, dof));
  rec.problem.start = get_config(r, dof);
  rec.problem.goal = get_config(r, dof);
  const auto has_obj = r.get<std::uint8_t>();
  if (has_obj > 1) throw IoError("dataset record has a bad in-hand flag");
  if (has_obj) {
    const auto prim = r.get<std::uint8_t>();
    if (prim > 3) throw IoError("dataset record has an unknown in-hand primitive");
    Vec3 dims;
    for (int i = 0; i < 3; ++i) dims[i] = r.get_f32();
    InHandObject obj = make_in_hand_object(static_cast<InHandPrimitive>(prim), dims);
    for (int i = 0; i < 3; ++i) obj.grasp.position[i] = r.get_f32();
    const double qw = r.get_f32(), qx = r.get_f32(), qy = r.get_f32(), qz = r.get_f32();
    obj.grasp.orientation = Quat(qw, qx, qy, qz);
    rec.problem.in_hand = std::move(obj);
  }
  try {
    rec.observation = decode_cloud(r.get_string());
  } catch (const InvalidInput& e) {
    throw IoError(std::string("dataset observation: ") + e.what());
  }
  if (!r.done()) throw IoError("dataset record has trailing bytes");
  return rec;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw InvalidInput("[Factory] " + key + " expects true or false: " + value);
}

double single(const std::string& key, const std::string& value) {
  auto v = parse_numbers(value);
  if (v.size() != 1) throw InvalidInput("[Factory] " + key + " expects one number: " + value);
  return v[0];
}

int whole(const std::string& key, const std::string& value) {
  double v = single(key, value);
  if (v != std::floor(v) || std::abs(v) > 1e9) throw InvalidInput("[Factory] " + key + " expects an integer: " + value);
  return static_cast<int>(v);
}

JointConfig vector_of(const std::vector<double>& v) {
  JointConfig q(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) q[static_cast<Eigen::Index>(i)] = v[i];
  return q;
}

std::string list(const JointConfig& q) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < q.size(); ++i) s += (i ? ", " : "") + format_double(q[i]);
  return s + "]";
}

std::string list(const Vec3& a, const Vec3& b) {
  std::string s = "[";
  for (int i = 0; i < 3; ++i) s += format_double(a[i]) + ", ";
  for (int i = 0; i < 3; ++i) s += format_double(b[i]) + (i < 2 ? ", " : "]");
  return s;
}

void round_in_hand(std::optional<InHandObject>& in_hand) {
  if (!in_hand) return;
  Vec3 dims, position;
  for (int i = 0; i < 3; ++i) {
    dims[i] = to_float(in_hand->dims[i]);
    position[i] = to_float(in_hand->grasp.position[i]);
  }
  Eigen::Vector4d q = in_hand->grasp.orientation.coeffs();
  for (int i = 0; i < 4; ++i) q[i] = to_float(q[i]);
  InHandObject obj = make_in_hand_object(in_hand->primitive, dims);
  obj.grasp.position = position;
  obj.grasp.orientation.coeffs() = q;
  in_hand = std::move(obj);
}

DatasetRecord with_observation(DatasetRecord r, const ObservationContext& ctx) {
  r.observation = assemble_observation(ctx, r.problem.start, r.problem.goal, r.problem.in_hand, r.seed);
  return r;
}

}  // namespace

const char* to_string(FilterStatus s) {
  switch (s) {
    case FilterStatus::kept:
      return "kept";
    case FilterStatus::length:
      return "length";
    case FilterStatus::workspace:
      return "workspace";
  }
  return "?";
}

std::string DatasetRecord::tag() const {
  if (reversed) return "reversed";
  if (relabeled) return "relabeled";
  return "expert";
}

bool DatasetRecord::operator==(const DatasetRecord& o) const {
  return seed == o.seed && scene_seed == o.scene_seed && reversed == o.reversed && relabeled == o.relabeled &&
         approximate == o.approximate && status == o.status && problem.start_tight == o.problem.start_tight &&
         problem.goal_tight == o.problem.goal_tight && problem.start.size() == o.problem.start.size() &&
         problem.start == o.problem.start && problem.goal.size() == o.problem.goal.size() &&
         problem.goal == o.problem.goal && same_in_hand(problem.in_hand, o.problem.in_hand) &&
         same_configs(trajectory.waypoints, o.trajectory.waypoints) &&
         same_configs(trajectory.deltas, o.trajectory.deltas) && same_cloud(observation, o.observation);
}

PointCloud sample_robot_cloud(const RobotBody& body, const JointConfig& q, std::size_t n, std::uint64_t seed,
                              PointLabel label) {
  const FkResult fk = forward_kinematics(body.chain(), q);
  const std::vector<Sphere> spheres = place_spheres(body.model(), fk);
  std::vector<double> areas;
  double robot_area = 0.0;
  for (const auto& s : spheres) {
    areas.push_back(s.radius * s.radius);
    robot_area += 4.0 * M_PI * s.radius * s.radius;
  }
  const auto& obj = body.in_hand();
  std::size_t n_obj = 0;
  if (obj) {
    const double a = in_hand_area(*obj);
    n_obj = std::min<std::size_t>(n, static_cast<std::size_t>(std::llround(static_cast<double>(n) * a / (a + robot_area))));
  }
  Rng rng(seed);
  PointCloud out;
  out.points.reserve(n);
  out.labels.reserve(n);
  if (!spheres.empty()) {
    std::discrete_distribution<std::size_t> pick(areas.begin(), areas.end());
    std::normal_distribution<double> g;
    for (std::size_t k = n_obj; k < n; ++k) {
      Vec3 p;
      // Rejection keeps points off surfaces buried inside neighbouring spheres.
      for (int attempt = 0; attempt < 64; ++attempt) {
        const std::size_t i = pick(rng);
        Vec3 d(g(rng), g(rng), g(rng));
        while (d.squaredNorm() < 1e-12) d = Vec3(g(rng), g(rng), g(rng));
        p = spheres[i].center + spheres[i].radius * d.normalized();
        bool buried = false;
        for (std::size_t j = 0; j < spheres.size() && !buried; ++j)
          buried = j != i && (p - spheres[j].center).norm() < spheres[j].radius;
        if (!buried) break;
      }
      out.push_back(p, label);
    }
  } else if (!obj) {
    throw InvalidInput("robot cloud needs at least one sphere");
  } else {
    n_obj = n;
  }
  if (n_obj > 0) {
    const Iso3 frame = fk.ee * obj->grasp.isometry();
    const PointLabel obj_label = label == PointLabel::robot ? PointLabel::in_hand : label;
    PointCloud local = obj->sample_surface(n_obj, rng);
    for (const auto& p : local.points) out.push_back(frame * p, obj_label);
  }
  return out;
}

PointCloud scene_obstacle_cloud(const Scene& scene, const ObservationOptions& opts, std::uint64_t seed) {
  Rng rng(seed);
  PointCloud raw = scene_surface_cloud(scene, opts.surface_density, rng);
  PointCloud cloud = process_cloud(raw, opts.crop, opts.process);
  if (cloud.size() > opts.max_obstacle_points) cloud = subsample(cloud, opts.max_obstacle_points, rng);
  return cloud;
}

PointCloud assemble_observation(const ObservationContext& ctx, const JointConfig& q0, const JointConfig& g,
                                const std::optional<InHandObject>& in_hand, std::uint64_t seed) {
  ctx.chain.check_config(q0);
  ctx.chain.check_config(g);
  const RobotBody body(ctx.chain, ctx.model, in_hand);
  PointCloud out = sample_robot_cloud(body, q0, ctx.options.robot_points, derive_seed(seed, 1), PointLabel::robot);
  out.append(sample_robot_cloud(body, g, ctx.options.goal_points, derive_seed(seed, 2), PointLabel::goal_robot));
  PointCloud obstacles = ctx.obstacles;
  if (obstacles.size() > ctx.options.max_obstacle_points) {
    Rng rng(derive_seed(seed, 3));
    obstacles = subsample(obstacles, ctx.options.max_obstacle_points, rng);
  }
  out.append(segment_robot(obstacles, body, q0, ctx.options.segment_eps).cloud);
  out.round_to_float();
  return out;
}

DatasetRecord relabel_hindsight(const DatasetRecord& record, const ObservationContext& ctx) {
  if (!record.approximate || record.trajectory.waypoints.empty()) return record;
  DatasetRecord out = record;
  out.problem.goal = record.trajectory.waypoints.back();
  out.relabeled = true;
  return with_observation(std::move(out), ctx);
}

DatasetRecord reverse_augment(const DatasetRecord& record, const ObservationContext& ctx) {
  DatasetRecord out = record;
  std::reverse(out.trajectory.waypoints.begin(), out.trajectory.waypoints.end());
  out.trajectory = Trajectory::from_waypoints(std::move(out.trajectory.waypoints));
  std::swap(out.problem.start, out.problem.goal);
  std::swap(out.problem.start_tight, out.problem.goal_tight);
  out.reversed = !record.reversed;
  return with_observation(std::move(out), ctx);
}

double task_space_length(const KinematicChain& chain, const Trajectory& traj) {
  double total = 0.0;
  Vec3 prev;
  for (std::size_t i = 0; i < traj.waypoints.size(); ++i) {
    const Vec3 p = forward_kinematics(chain, traj.waypoints[i]).ee.translation();
    if (i) total += (p - prev).norm();
    prev = p;
  }
  return total;
}

std::vector<std::size_t> length_outliers(const std::vector<double>& lengths, double num_std, FilterStats* stats) {
  if (lengths.size() < 2) throw InvalidInput("length filter needs at least two records");
  std::vector<double> sorted = lengths;
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : sorted) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / n);
  const double threshold = mean + num_std * sd;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < lengths.size(); ++i)
    if (lengths[i] > threshold) out.push_back(i);
  if (stats) {
    stats->mean_length = mean;
    stats->std_length = sd;
    stats->length_threshold = threshold;
  }
  return out;
}

FilterResult filter_length(std::vector<DatasetRecord> records, const KinematicChain& chain, double num_std) {
  std::vector<double> lengths;
  for (const auto& r : records) lengths.push_back(task_space_length(chain, r.trajectory));
  FilterResult res;
  const auto drop = length_outliers(lengths, num_std, &res.stats);
  res.stats.considered = records.size();
  std::vector<bool> pruned(records.size(), false);
  for (auto i : drop) pruned[i] = true;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (pruned[i]) {
      records[i].status = FilterStatus::length;
      res.pruned.push_back(std::move(records[i]));
    } else {
      res.kept.push_back(std::move(records[i]));
    }
  }
  res.stats.pruned_length = res.pruned.size();
  return res;
}

namespace {

bool ee_leaves(const KinematicChain& chain, const Trajectory& traj, const WorkspaceBox& box) {
  for (const auto& q : traj.waypoints)
    if (!box.contains(forward_kinematics(chain, q).ee.translation())) return true;
  return false;
}

}  // namespace

FilterResult filter_workspace(std::vector<DatasetRecord> records, const KinematicChain& chain,
                              const WorkspaceBox& box) {
  if (!box.valid()) throw InvalidInput("workspace box must have min < max on every axis");
  FilterResult res;
  res.stats.workspace = box;
  res.stats.considered = records.size();
  for (auto& r : records) {
    if (ee_leaves(chain, r.trajectory, box)) {
      r.status = FilterStatus::workspace;
      res.pruned.push_back(std::move(r));
    } else {
      res.kept.push_back(std::move(r));
    }
  }
  res.stats.pruned_workspace = res.pruned.size();
  return res;
}

std::vector<DatasetRecord> apply_filters(std::vector<DatasetRecord> records, const KinematicChain& chain,
                                         const WorkspaceBox& box, FilterStats& stats) {
  if (!box.valid()) throw InvalidInput("workspace box must have min < max on every axis");
  stats = FilterStats{};
  stats.workspace = box;
  stats.considered = records.size();
  for (auto& r : records) r.status = FilterStatus::kept;
  if (records.size() >= 2) {
    std::vector<double> lengths;
    for (const auto& r : records) lengths.push_back(task_space_length(chain, r.trajectory));
    for (auto i : length_outliers(lengths, 2.0, &stats)) records[i].status = FilterStatus::length;
  }
  for (auto& r : records) {
    if (r.status != FilterStatus::kept) {
      ++stats.pruned_length;
      continue;
    }
    if (ee_leaves(chain, r.trajectory, box)) {
      r.status = FilterStatus::workspace;
      ++stats.pruned_workspace;
    }
  }
  return records;
}

FactoryConfig FactoryConfig::parse(std::string_view text) {
  const auto file = KeyValueFile::parse(text);
  KeyValueFile scenes;
  std::vector<std::pair<std::string, std::string>> factory, augment;
  for (const auto& sec : file.sections()) {
    if (sec.name == kFactorySection) {
      factory.insert(factory.end(), sec.entries.begin(), sec.entries.end());
    } else if (sec.name == kAugmentSection) {
      augment.insert(augment.end(), sec.entries.begin(), sec.entries.end());
    } else {
      auto& s = scenes.add_section(sec.name);
      s.entries = sec.entries;
    }
  }
  FactoryConfig cfg;
  cfg.scenes = GenConfig::parse(scenes.dump());
  cfg.problems = ProblemConfig::from(cfg.scenes);
  cfg.augment = AugmentConfig::from_entries(augment);
  for (const auto& [key, value] : factory) {
    if (key == "reverse") {
      cfg.reverse = parse_bool(key, value);
    } else if (key == "relabel") {
      cfg.relabel = parse_bool(key, value);
    } else if (key == "attempts per seed") {
      cfg.attempts_per_seed = whole(key, value);
    } else if (key == "scene draws") {
      cfg.scene_draws = whole(key, value);
    } else if (key == "workers") {
      cfg.workers = whole(key, value);
    } else if (key == "tight attempts") {
      cfg.problems.tight_attempts = whole(key, value);
    } else if (key == "region inset") {
      cfg.problems.region_inset = single(key, value);
    } else if (key == "planner budget") {
      double s = single(key, value);
      if (s > 0)
        cfg.planner.budget = std::chrono::milliseconds(std::llround(s * 1000.0));
      else
        cfg.planner.budget.reset();
    } else if (key == "planner max iterations") {
      cfg.planner.max_iterations = whole(key, value);
    } else if (key == "planner restarts") {
      cfg.planner.restarts = whole(key, value);
    } else if (key == "planner step") {
      cfg.planner.step = single(key, value);
    } else if (key == "planner goal bias") {
      cfg.planner.goal_bias = single(key, value);
    } else if (key == "planner shortcut iterations") {
      cfg.planner.shortcut_iterations = whole(key, value);
    } else if (key == "trajectory length") {
      int n = whole(key, value);
      if (n < 2) throw InvalidInput("[Factory] trajectory length must be at least 2");
      cfg.smoothing.n = static_cast<std::size_t>(n);
    } else if (key == "max spacing") {
      cfg.smoothing.max_spacing = single(key, value);
    } else if (key == "shortcut iterations") {
      cfg.smoothing.shortcut.iterations = whole(key, value);
    } else if (key == "shortcut margin") {
      cfg.smoothing.shortcut.margin = single(key, value);
    } else if (key == "smoothing attempts") {
      cfg.smoothing.attempts = whole(key, value);
    } else if (key == "velocity limits") {
      cfg.limits.max_velocity = vector_of(parse_numbers(value));
    } else if (key == "acceleration limits") {
      cfg.limits.max_acceleration = vector_of(parse_numbers(value));
    } else if (key == "workspace box") {
      auto v = parse_numbers(value);
      if (v.size() != 6) throw InvalidInput("[Factory] workspace box expects [min x, y, z, max x, y, z]");
      cfg.workspace = {Vec3(v[0], v[1], v[2]), Vec3(v[3], v[4], v[5])};
    } else if (key == "observation crop") {
      auto v = parse_numbers(value);
      if (v.size() != 6) throw InvalidInput("[Factory] observation crop expects [min x, y, z, max x, y, z]");
      cfg.observation.crop = {Vec3(v[0], v[1], v[2]), Vec3(v[3], v[4], v[5])};
    } else if (key == "robot points") {
      cfg.observation.robot_points = static_cast<std::size_t>(std::max(0, whole(key, value)));
    } else if (key == "goal points") {
      cfg.observation.goal_points = static_cast<std::size_t>(std::max(0, whole(key, value)));
    } else if (key == "obstacle points") {
      cfg.observation.max_obstacle_points = static_cast<std::size_t>(std::max(0, whole(key, value)));
    } else if (key == "cloud density") {
      cfg.observation.surface_density = single(key, value);
    } else if (key == "voxel size") {
      cfg.observation.process.voxel = single(key, value);
    } else if (key == "segmentation eps") {
      cfg.observation.segment_eps = single(key, value);
    } else {
      throw InvalidInput("unknown configuration row: [Factory] " + key);
    }
  }
  cfg.validate();
  return cfg;
}

FactoryConfig FactoryConfig::load(const std::filesystem::path& path) {
  return parse(KeyValueFile::load(path).dump());
}

std::string FactoryConfig::dump() const {
  std::ostringstream out;
  out << scenes.dump() << "\n[" << kFactorySection << "]\n";
  out << "reverse = " << (reverse ? "true" : "false") << '\n';
  out << "relabel = " << (relabel ? "true" : "false") << '\n';
  out << "attempts per seed = " << attempts_per_seed << '\n';
  out << "scene draws = " << scene_draws << '\n';
  out << "workers = " << workers << '\n';
  out << "tight attempts = " << problems.tight_attempts << '\n';
  out << "region inset = " << format_double(problems.region_inset) << '\n';
  out << "planner budget = " << (planner.budget ? format_double(planner.budget->count() / 1000.0) : "0") << '\n';
  out << "planner max iterations = " << planner.max_iterations << '\n';
  out << "planner restarts = " << planner.restarts << '\n';
  out << "planner step = " << format_double(planner.step) << '\n';
  out << "planner goal bias = " << format_double(planner.goal_bias) << '\n';
  out << "planner shortcut iterations = " << planner.shortcut_iterations << '\n';
  out << "trajectory length = " << smoothing.n << '\n';
  out << "max spacing = " << format_double(smoothing.max_spacing) << '\n';
  out << "shortcut iterations = " << smoothing.shortcut.iterations << '\n';
  out << "shortcut margin = " << format_double(smoothing.shortcut.margin) << '\n';
  out << "smoothing attempts = " << smoothing.attempts << '\n';
  out << "velocity limits = " << list(limits.max_velocity) << '\n';
  out << "acceleration limits = " << list(limits.max_acceleration) << '\n';
  out << "workspace box = " << list(workspace.min, workspace.max) << '\n';
  out << "observation crop = " << list(observation.crop.min, observation.crop.max) << '\n';
  out << "robot points = " << observation.robot_points << '\n';
  out << "goal points = " << observation.goal_points << '\n';
  out << "obstacle points = " << observation.max_obstacle_points << '\n';
  out << "cloud density = " << format_double(observation.surface_density) << '\n';
  out << "voxel size = " << format_double(observation.process.voxel) << '\n';
  out << "segmentation eps = " << format_double(observation.segment_eps) << '\n';
  out << '\n' << augment.dump();
  return out.str();
}

void FactoryConfig::validate() const {
  scenes.validate();
  planner.validate();
  augment.validate();
  if (!workspace.valid()) throw InvalidInput("workspace box must have min < max on every axis");
  if (!observation.crop.valid()) throw InvalidInput("observation crop must have min < max on every axis");
  if (attempts_per_seed < 1) throw InvalidInput("attempts per seed must be positive");
  if (scene_draws < 1) throw InvalidInput("scene draws must be positive");
  if (workers < 0) throw InvalidInput("workers must be non-negative");
  if (smoothing.n < 2) throw InvalidInput("trajectory length must be at least 2");
  if (!(smoothing.max_spacing > 1e-5)) throw InvalidInput("max spacing must be positive");
  if (smoothing.attempts < 1) throw InvalidInput("smoothing attempts must be positive");
  if (!(smoothing.shortcut.margin >= 0)) throw InvalidInput("shortcut margin must be non-negative");
  if (!(problems.region_inset >= 0)) throw InvalidInput("region inset must be non-negative");
  if (problems.tight_attempts < 1) throw InvalidInput("tight attempts must be positive");
  if (observation.robot_points == 0 || observation.goal_points == 0)
    throw InvalidInput("robot and goal clouds need at least one point");
  if (!(observation.surface_density > 0)) throw InvalidInput("cloud density must be positive");
  if (!(observation.process.voxel > 0)) throw InvalidInput("voxel size must be positive");
  if (!(observation.segment_eps >= 0)) throw InvalidInput("segmentation eps must be non-negative");
  if (limits.max_velocity.size() != limits.max_acceleration.size())
    throw InvalidInput("velocity and acceleration limits differ in length");
}

void round_for_storage(DatasetRecord& record) {
  auto check = [](const JointConfig& q) {
    if (!on_grid(q, kStorageGridBits) || (q.array().abs() >= 8.0).any())
      throw InvalidInput("joint values must sit on the storage grid");
  };
  for (const auto& q : record.trajectory.waypoints) check(q);
  check(record.problem.start);
  check(record.problem.goal);
  record.trajectory = Trajectory::from_waypoints(std::move(record.trajectory.waypoints));
  round_in_hand(record.problem.in_hand);
  record.observation.round_to_float();
}

SeedOutput run_seed(const FactoryConfig& cfg, const KinematicChain& chain, const SphereModel& model,
                    std::uint64_t seed) {
  SeedOutput out;
  out.log.seed = seed;
  Rng kinds_rng(derive_seed(seed, 0));
  const EndpointKinds kinds = draw_endpoint_kinds(cfg.problems.tight_ratio, kinds_rng);
  SmoothOptions smoothing = cfg.smoothing;
  // Headroom for the storage-grid snap below.
  smoothing.max_spacing -= 1e-6;

  std::uint64_t draw = 0;
  for (int attempt = 0; attempt < cfg.attempts_per_seed; ++attempt) {
    std::optional<Scene> scene;
    std::optional<CollisionWorld> world;
    PlanningProblem problem;
    for (int d = 0; d < cfg.scene_draws && !scene; ++d) {
      const std::uint64_t scene_seed = derive_seed(seed, 100 + draw++);
      Scene candidate = generate_scene(cfg.scenes, scene_seed);
      ++out.log.scenes;
      out.push_iterations.insert(out.push_iterations.end(), candidate.log.push_iterations.begin(),
                                 candidate.log.push_iterations.end());
      CollisionWorld w = scene_world(candidate);
      Rng prng(derive_seed(scene_seed, 7));
      try {
        problem = sample_problem(candidate, w, chain, model, cfg.problems, kinds, prng);
      } catch (const UnsampleableScene&) {
        ++out.log.unsampleable;
        continue;
      }
      scene = std::move(candidate);
      world = std::move(w);
    }
    if (!scene) continue;

    // Plan with the object exactly as it will be stored.
    round_in_hand(problem.in_hand);
    const RobotBody body(chain, model, problem.in_hand);
    if (in_collision(*world, body, problem.start) || in_collision(*world, body, problem.goal)) {
      ++out.log.plan_failures;
      continue;
    }

    PlannerConfig pc = cfg.planner;
    pc.seed = derive_seed(scene->seed, 8);
    pc.allow_approximate = cfg.relabel;
    const PlanResult planned = plan(problem, *world, body, pc);
    if (!planned.path || planned.path->cost <= 0.0) {
      ++out.log.plan_failures;
      continue;
    }

    Rng srng(derive_seed(scene->seed, 9));
    std::optional<SmoothResult> smoothed;
    try {
      smoothed = smooth_path(*planned.path, cfg.limits, *world, body, srng, smoothing);
    } catch (const PathTooLong&) {
      ++out.log.too_long;
      continue;
    }
    if (!smoothed) {
      ++out.log.smooth_failures;
      continue;
    }

    std::vector<JointConfig> waypoints;
    for (const auto& q : smoothed->trajectory.waypoints) waypoints.push_back(snap(q, kStorageGridBits));
    Trajectory traj = Trajectory::from_waypoints(std::move(waypoints));
    const bool in_limits = std::all_of(traj.waypoints.begin(), traj.waypoints.end(),
                                       [&](const JointConfig& q) { return chain.within_limits(q); });
    if (!in_limits || traj.max_step() > cfg.smoothing.max_spacing || !traj.within_limits(cfg.limits) ||
        traj.cost() > planned.path->cost) {
      ++out.log.smooth_failures;
      continue;
    }
    if (!path_collision_free(traj.waypoints, *world, body, 0.01)) {
      ++out.log.audit_failures;
      continue;
    }

    const PointCloud obstacles = scene_obstacle_cloud(*scene, cfg.observation, derive_seed(scene->seed, 3));
    const ObservationContext ctx{chain, model, obstacles, cfg.observation};
    DatasetRecord rec;
    rec.seed = seed;
    rec.scene_seed = scene->seed;
    rec.approximate = planned.path->approximate;
    rec.problem = problem;
    rec.trajectory = std::move(traj);
    if (rec.approximate) {
      rec = relabel_hindsight(rec, ctx);
    } else {
      rec = with_observation(std::move(rec), ctx);
    }
    round_for_storage(rec);
    out.records.push_back(rec);
    if (cfg.reverse) {
      DatasetRecord rev = reverse_augment(rec, ctx);
      round_for_storage(rev);
      out.records.push_back(std::move(rev));
    }
    out.scene = std::move(scene);
    out.log.produced = true;
    return out;
  }
  return out;
}

FactoryOutput run_factory(const FactoryConfig& cfg, const KinematicChain& chain, const SphereModel& model,
                          const std::vector<std::uint64_t>& seeds) {
  cfg.validate();
  cfg.limits.validate(chain.dof());
  model.validate(chain);
  std::vector<SeedOutput> slots(seeds.size());
  const int workers = cfg.workers > 0 ? cfg.workers : omp_get_num_procs();
  const auto count = static_cast<std::int64_t>(seeds.size());

#pragma omp parallel for schedule(dynamic) num_threads(workers)
  for (std::int64_t i = 0; i < count; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      slots[k] = run_seed(cfg, chain, model, seeds[k]);
    } catch (const std::exception& e) {
      slots[k] = SeedOutput{};
      slots[k].log.seed = seeds[k];
      slots[k].log.error = e.what();
    }
  }

  FactoryOutput out;
  auto& st = out.stats;
  st.seeds = seeds.size();
  std::vector<DatasetRecord> pool;
  for (auto& slot : slots) {
    const auto& log = slot.log;
    st.scenes += static_cast<std::size_t>(log.scenes);
    st.unsampleable += static_cast<std::size_t>(log.unsampleable);
    st.plan_failures += static_cast<std::size_t>(log.plan_failures);
    st.too_long += static_cast<std::size_t>(log.too_long);
    st.smooth_failures += static_cast<std::size_t>(log.smooth_failures);
    st.audit_failures += static_cast<std::size_t>(log.audit_failures);
    if (!log.produced) ++st.seeds_without_record;
    for (int it : slot.push_iterations) ++st.push_histogram[it];
    for (auto& r : slot.records) {
      if (!r.reversed) {
        st.endpoints += 2;
        st.tight_endpoints += (r.problem.start_tight ? 1 : 0) + (r.problem.goal_tight ? 1 : 0);
      }
      pool.push_back(std::move(r));
    }
    out.logs.push_back(log);
  }
  out.records = apply_filters(std::move(pool), chain, cfg.workspace, st.filters);
  st.records = out.records.size();
  st.kept = st.records - st.filters.pruned();
  return out;
}

std::string encode_dataset(const KinematicChain& chain, const std::vector<DatasetRecord>& records) {
  ByteWriter w;
  w.put_bytes(std::string_view(kMagic, 4));
  DatasetHeader h;
  h.chain_hash = chain.hash();
  h.dof = static_cast<std::uint32_t>(chain.dof());
  h.records = static_cast<std::uint32_t>(records.size());
  for (const auto& r : records) {
    if (r.status == FilterStatus::kept) ++h.kept;
    if (r.status == FilterStatus::length) ++h.pruned_length;
    if (r.status == FilterStatus::workspace) ++h.pruned_workspace;
  }
  w.put(h.version);
  w.put(h.chain_hash);
  w.put(h.dof);
  w.put(h.records);
  w.put(h.kept);
  w.put(h.pruned_length);
  w.put(h.pruned_workspace);
  for (const auto& r : records) w.put_string(encode_record(r, chain.dof()));
  return w.take();
}

Dataset decode_dataset(std::string_view bytes) {
  ByteReader r(bytes);
  if (r.get_bytes(4) != std::string_view(kMagic, 4)) throw IoError("not a dataset file (bad magic)");
  Dataset data;
  auto& h = data.header;
  h.version = r.get<std::uint32_t>();
  if (h.version != 1) throw IoError("unsupported dataset version " + std::to_string(h.version));
  h.chain_hash = r.get<std::uint64_t>();
  h.dof = r.get<std::uint32_t>();
  h.records = r.get<std::uint32_t>();
  h.kept = r.get<std::uint32_t>();
  h.pruned_length = r.get<std::uint32_t>();
  h.pruned_workspace = r.get<std::uint32_t>();
  if (h.dof == 0 || h.dof > 64) throw IoError("dataset has an implausible dof");
  if (static_cast<std::uint64_t>(h.kept) + h.pruned_length + h.pruned_workspace != h.records)
    throw IoError("dataset header counts do not add up");
  for (std::uint32_t i = 0; i < h.records; ++i) data.records.push_back(decode_record(r.get_string(), h.dof));
  if (!r.done()) throw IoError("dataset has trailing bytes");
  return data;
}

void write_dataset(const std::filesystem::path& path, const KinematicChain& chain,
                   const std::vector<DatasetRecord>& records) {
  write_file(path.string(), encode_dataset(chain, records));
}

Dataset read_dataset(const std::filesystem::path& path) { return decode_dataset(read_file(path.string())); }

std::string sidecar_text(const FactoryStats& stats, const std::vector<DatasetRecord>& records,
                         const KinematicChain& chain) {
  using nlohmann::json;
  json summary = {{"type", "summary"},
                  {"seeds", stats.seeds},
                  {"seeds_without_record", stats.seeds_without_record},
                  {"scenes", stats.scenes},
                  {"unsampleable_scenes", stats.unsampleable},
                  {"plan_failures", stats.plan_failures},
                  {"too_long", stats.too_long},
                  {"smooth_failures", stats.smooth_failures},
                  {"audit_failures", stats.audit_failures},
                  {"records", stats.records},
                  {"kept", stats.kept},
                  {"pruned_length", stats.filters.pruned_length},
                  {"pruned_workspace", stats.filters.pruned_workspace},
                  {"mean_length", stats.filters.mean_length},
                  {"std_length", stats.filters.std_length},
                  {"length_threshold", stats.filters.length_threshold},
                  {"workspace_min", {stats.filters.workspace.min.x(), stats.filters.workspace.min.y(),
                                     stats.filters.workspace.min.z()}},
                  {"workspace_max", {stats.filters.workspace.max.x(), stats.filters.workspace.max.y(),
                                     stats.filters.workspace.max.z()}},
                  {"tight_endpoints", stats.tight_endpoints},
                  {"endpoints", stats.endpoints}};
  json hist = json::object();
  for (const auto& [k, v] : stats.push_histogram) hist[std::to_string(k)] = v;
  summary["push_iterations"] = hist;
  std::string out = summary.dump() + '\n';
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    json line = {{"index", i},
                 {"seed", r.seed},
                 {"scene_seed", r.scene_seed},
                 {"tag", r.tag()},
                 {"status", to_string(r.status)},
                 {"approximate", r.approximate},
                 {"start_tight", r.problem.start_tight},
                 {"goal_tight", r.problem.goal_tight},
                 {"waypoints", r.trajectory.size()},
                 {"joint_cost", r.trajectory.cost()},
                 {"task_length", task_space_length(chain, r.trajectory)},
                 {"robot_points", r.observation.count(PointLabel::robot)},
                 {"in_hand_points", r.observation.count(PointLabel::in_hand)},
                 {"goal_points", r.observation.count(PointLabel::goal_robot)},
                 {"obstacle_points", r.observation.count(PointLabel::obstacle)}};
    line["in_hand"] = r.problem.in_hand ? json(static_cast<int>(r.problem.in_hand->primitive)) : json(nullptr);
    out += line.dump() + '\n';
  }
  return out;
}

DatasetSummary summarize(const Dataset& data, const KinematicChain& chain, const WorkspaceBox& workspace) {
  DatasetSummary s;
  s.records = data.records.size();
  std::size_t tight = 0, endpoints = 0;
  double length_sum = 0.0, cost_sum = 0.0;
  for (const auto& r : data.records) {
    ++s.by_tag[r.tag()];
    const double len = task_space_length(chain, r.trajectory);
    s.lengths.push_back(len);
    if (r.status == FilterStatus::kept) {
      ++s.kept;
      length_sum += len;
      cost_sum += r.trajectory.cost();
    }
    if (r.status == FilterStatus::length) ++s.pruned_length;
    if (r.status == FilterStatus::workspace) ++s.pruned_workspace;
    if (!r.reversed) {
      endpoints += 2;
      tight += (r.problem.start_tight ? 1 : 0) + (r.problem.goal_tight ? 1 : 0);
    }
  }
  if (s.kept) {
    s.mean_length = length_sum / static_cast<double>(s.kept);
    s.mean_joint_cost = cost_sum / static_cast<double>(s.kept);
  }
  if (endpoints) s.tight_fraction = static_cast<double>(tight) / static_cast<double>(endpoints);
  FilterStats recount;
  apply_filters(data.records, chain, workspace, recount);
  s.recount_length = recount.pruned_length;
  s.recount_workspace = recount.pruned_workspace;
  return s;
}

}  // namespace planfactory
