#include <algorithm>
#include <cmath>
#include <sstream>

#include "planfactory/binary_io.hpp"
#include "planfactory/scenegen.hpp"

namespace planfactory {

namespace {

const double kClear = 0.011;
const char* const kObstacles = "General Obstacle Parameters";
const char* const kMeshes = "Objaverse Mesh Parameters";
const char* const kGeneration = "Generation";

AssetInstance make_base_table(const GenConfig& cfg, Rng& rng) {
  AssetInstance t;
  t.category = AssetCategory::base_table;
  auto dims = cfg.ranges(kObstacles, "table dim ranges");
  const double dx = dims[0].sample(rng), dy = dims[1].sample(rng), dz = dims[2].sample(rng);
  const double top = cfg.range(kObstacles, "table height range").sample(rng);
  const double front = cfg.scalar(kGeneration, "base table front distance");
  t.params = {{"table dim x", dx}, {"table dim y", dy}, {"table dim z", dz}, {"table height", top}};
  t.pose.position = Vec3(front + dx / 2, 0, top);
  Cuboid slab;
  slab.half_extents = Vec3(dx / 2, dy / 2, dz / 2);
  slab.pose.position = Vec3(front + dx / 2, 0, top - dz / 2);
  t.cuboids.push_back(slab);

  // Loose clutter goes on the table top near the robot.
  Range x = cfg.range(kMeshes, "x pos range"), y = cfg.range(kMeshes, "y pos range");
  x.lo = std::max(x.lo, front);
  x.hi = std::min(x.hi, front + dx);
  y.lo = std::max(y.lo, -dy / 2);
  y.hi = std::min(y.hi, dy / 2);
  if (x.hi - x.lo > 0.02 && y.hi - y.lo > 0.02) {
    SamplingRegion r;
    r.box.half_extents = Vec3((x.hi - x.lo) / 2, (y.hi - y.lo) / 2, 0.15);
    r.box.pose.position = Vec3((x.hi + x.lo) / 2, (y.hi + y.lo) / 2, top + kClear + 0.15);
    r.approach = -Vec3::UnitZ();
    r.tight = false;
    t.regions.push_back(r);
  }
  return t;
}

double yaw_of(const Quat& q) {
  const Eigen::Matrix3d r = q.toRotationMatrix();
  return std::atan2(r(1, 0), r(0, 0));
}

// Drops a clutter mesh into the region: uniform yaw, scale drawn from the
// configured range then shrunk until it fits, resting on the region floor.
std::optional<ClutterInstance> sample_clutter(const SamplingRegion& region,
                                              const std::vector<std::pair<std::string, TriMesh>>& pool,
                                              const Range& scale, Rng& rng) {
  const auto& [name, raw] = pool[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(pool.size()) - 1))];
  ClutterInstance c;
  c.source = name;
  c.mesh = raw;
  c.mesh.scale = 1.0;
  const WorkspaceBox b = c.mesh.bounds();
  const Vec3 ext = b.max - b.min;
  const double longest = ext.maxCoeff();
  if (!(longest > 0)) return std::nullopt;
  const double yaw = uniform(rng, 0.0, 2.0 * M_PI);

  double f = scale.sample(rng) / longest;
  const double half_diag = 0.5 * ext.head<2>().norm();
  const Vec3& rh = region.box.half_extents;
  f = std::min({f, rh.x() / half_diag, rh.y() / half_diag, 2.0 * rh.z() / ext.z()});
  if (f * longest < 0.03) return std::nullopt;
  c.mesh.scale = f;

  const double r = f * half_diag;
  const double ox = uniform(rng, -(rh.x() - r), rh.x() - r);
  const double oy = uniform(rng, -(rh.y() - r), rh.y() - r);
  const Vec3 floor = region.box.pose.isometry() * Vec3(ox, oy, -rh.z());
  const Quat q = Quat(Eigen::AngleAxisd(yaw_of(region.box.pose.orientation) + yaw, Vec3::UnitZ()));
  const Vec3 center = f * 0.5 * (b.max + b.min);
  c.pose.orientation = q;
  c.pose.position = floor - q * Vec3(center.x(), center.y(), f * b.min.z());
  return c;
}

bool inside_footprint(const Cuboid& region, const Vec3& p) {
  const Vec3 l = region.to_local(p);
  return std::abs(l.x()) <= region.half_extents.x() + 1e-9 && std::abs(l.y()) <= region.half_extents.y() + 1e-9;
}

}  // namespace

std::vector<const SamplingRegion*> Scene::regions(bool tight_only) const {
  std::vector<const SamplingRegion*> out;
  auto add = [&](const AssetInstance& a) {
    for (const auto& r : a.regions)
      if (!tight_only || r.tight) out.push_back(&r);
  };
  add(table);
  for (const auto& a : assets) add(a);
  return out;
}

std::vector<Cuboid> Scene::obstacle_cuboids() const {
  std::vector<Cuboid> out = table.cuboids;
  for (const auto& a : assets) out.insert(out.end(), a.cuboids.begin(), a.cuboids.end());
  return out;
}

Scene generate_scene(const GenConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  Scene s;
  s.seed = seed;
  const double tol = cfg.collision_tolerance();
  const int max_iters = cfg.max_push_iterations();
  const double radius = cfg.scalar(kGeneration, "scene radius");

  s.table = make_base_table(cfg, rng);
  const auto& ko = cfg.values(kGeneration, "robot keep out half extents");
  s.keep_out.half_extents = Vec3(ko[0], ko[1], ko[2]);
  s.keep_out.pose = Pose{};
  const double top = s.table.pose.position.z();

  PlacementWorld world;
  world.tolerance = tol;
  world.items.push_back({s.keep_out});
  world.items.push_back(s.table.cuboids);

  // Per-category minimums first, then uniform draws among the categories
  // still below their maximum.
  std::vector<AssetCategory> plan;
  std::array<int, kSampledCategories.size()> planned{};
  for (std::size_t i = 0; i < kSampledCategories.size(); ++i) {
    auto [lo, hi] = cfg.category_count(kSampledCategories[i]);
    (void)hi;
    for (int k = 0; k < lo; ++k) plan.push_back(kSampledCategories[i]);
    planned[i] = lo;
  }
  const int k = std::max(uniform_int(rng, 1, cfg.max_objects()), static_cast<int>(plan.size()));
  while (static_cast<int>(plan.size()) < k) {
    std::vector<std::size_t> open;
    for (std::size_t i = 0; i < kSampledCategories.size(); ++i)
      if (planned[i] < cfg.category_count(kSampledCategories[i]).second) open.push_back(i);
    if (open.empty()) break;
    const std::size_t pick = open[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(open.size()) - 1))];
    plan.push_back(kSampledCategories[pick]);
    ++planned[pick];
  }

  for (AssetCategory cat : plan) {
    AssetInstance a = generate_asset(cat, cfg, rng);
    a.translate(Vec3(0, 0, top + kClear));
    auto iters = place_with_normal_push(world, a, max_iters, rng);
    if (!iters || a.bounding_box().pose.position.head<2>().norm() > radius) {
      ++s.log.dropped_assets;
      continue;
    }
    s.log.push_iterations.push_back(*iters);
    world.items.push_back(a.cuboids);
    s.assets.push_back(std::move(a));
  }

  const auto pool = cfg.mesh_dir() ? load_mesh_pool(*cfg.mesh_dir()) : builtin_mesh_pool();
  const Range scale = cfg.range(kMeshes, "scale range");
  auto place_clutter = [&](const SamplingRegion& region) {
    auto c = sample_clutter(region, pool, scale, rng);
    if (!c) {
      ++s.log.dropped_clutter;
      return;
    }
    Placeable p{{c->bounding_box()}, c->bounding_box()};
    const Vec3 start = p.bounds.pose.position;
    auto iters = place_with_normal_push(world, p, max_iters, rng);
    // Pushed off its support: it would float, so give up on it.
    if (!iters || !inside_footprint(region.box, p.bounds.pose.position)) {
      ++s.log.dropped_clutter;
      return;
    }
    c->pose.position += p.bounds.pose.position - start;
    s.log.push_iterations.push_back(*iters);
    world.items.push_back({c->bounding_box()});
    s.clutter.push_back(std::move(*c));
  };

  auto [per_lo, per_hi] = cfg.count(kMeshes, "number of mesh objects per programmatic asset");
  for (std::size_t i = 0; i < s.assets.size(); ++i) {
    const int n = uniform_int(rng, per_lo, per_hi);
    const auto& regions = s.assets[i].regions;
    for (int j = 0; j < n && !regions.empty(); ++j) {
      const SamplingRegion region =
          regions[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(regions.size()) - 1))];
      place_clutter(region);
    }
  }
  auto [tab_lo, tab_hi] = cfg.count(kMeshes, "number of mesh objects on the table");
  const int n_table = uniform_int(rng, tab_lo, tab_hi);
  for (int j = 0; j < n_table && !s.table.regions.empty(); ++j) place_clutter(s.table.regions.front());
  return s;
}

AuditResult audit_scene(const Scene& scene, double tolerance) {
  struct Item {
    std::vector<Cuboid> boxes;
    int kind;  // 0 keep-out, 1 base table, 2 other
  };
  std::vector<Item> items;
  items.push_back({{scene.keep_out}, 0});
  items.push_back({scene.table.cuboids, 1});
  for (const auto& a : scene.assets) items.push_back({a.cuboids, 2});
  for (const auto& c : scene.clutter) items.push_back({{c.bounding_box()}, 2});
  AuditResult r;
  for (std::size_t i = 0; i < items.size(); ++i)
    for (std::size_t j = i + 1; j < items.size(); ++j) {
      if (items[i].kind + items[j].kind == 1) continue;
      for (const auto& a : items[i].boxes)
        for (const auto& b : items[j].boxes) {
          const double d = box_distance(a, b);
          r.min_distance = std::min(r.min_distance, d);
          if (d < tolerance) ++r.violations;
        }
    }
  return r;
}

namespace {

PointCloud clutter_samples(const ClutterInstance& c, double density, Rng& rng) {
  const auto n = static_cast<std::size_t>(std::ceil(c.mesh.surface_area() * density));
  PointCloud cloud = sample_surface(c.mesh, n, rng);
  const Iso3 t = c.pose.isometry();
  for (auto& p : cloud.points) p = t * p;
  return cloud;
}

}  // namespace

CollisionWorld scene_world(const Scene& scene, double eps, double density) {
  PointCloud cloud;
  for (std::size_t i = 0; i < scene.clutter.size(); ++i) {
    Rng rng(derive_seed(scene.seed, 0xC1u + i));
    cloud.append(clutter_samples(scene.clutter[i], density, rng));
  }
  return CollisionWorld(std::move(cloud), scene.obstacle_cuboids(), eps);
}

PointCloud scene_surface_cloud(const Scene& scene, double density, Rng& rng) {
  PointCloud cloud;
  for (const auto& c : scene.obstacle_cuboids())
    cloud.append(sample_surface(c, static_cast<std::size_t>(std::ceil(c.surface_area() * density)), rng));
  for (const auto& c : scene.clutter) cloud.append(clutter_samples(c, density, rng));
  return cloud;
}

namespace {

void put(std::ostream& out, const Vec3& v) {
  out << ' ' << format_double(v.x()) << ' ' << format_double(v.y()) << ' ' << format_double(v.z());
}

void put(std::ostream& out, const Pose& p) {
  put(out, p.position);
  out << ' ' << format_double(p.orientation.w()) << ' ' << format_double(p.orientation.x()) << ' '
      << format_double(p.orientation.y()) << ' ' << format_double(p.orientation.z());
}

void put(std::ostream& out, const Cuboid& c) {
  put(out, c.half_extents);
  put(out, c.pose);
}

void put_asset(std::ostream& out, const AssetInstance& a) {
  out << "asset " << to_string(a.category) << '\n';
  for (const auto& [k, v] : a.params) out << "param " << format_double(v) << ' ' << k << '\n';
  out << "pose";
  put(out, a.pose);
  out << '\n';
  for (const auto& c : a.cuboids) {
    out << "cuboid";
    put(out, c);
    out << '\n';
  }
  for (const auto& r : a.regions) {
    out << "region " << (r.tight ? "tight" : "open");
    put(out, r.approach);
    put(out, r.box);
    out << '\n';
  }
  for (const auto& h : a.articulations) {
    out << "hinge";
    put(out, h.hinge_point);
    put(out, h.axis);
    out << ' ' << format_double(h.value) << ' ' << format_double(h.limits.lo) << ' ' << format_double(h.limits.hi)
        << '\n';
  }
  out << "end\n";
}

class LineReader {
 public:
  explicit LineReader(std::string_view text) : in_(std::string(text)) {}

  bool next() {
    while (std::getline(in_, line_)) {
      ++number_;
      if (line_.find_first_not_of(" \t\r") == std::string::npos) continue;
      tokens_.clear();
      tokens_.str(line_);
      tokens_ >> word_;
      return true;
    }
    return false;
  }
  const std::string& word() const { return word_; }
  double num() {
    std::string t;
    if (!(tokens_ >> t)) fail("missing number");
    try {
      std::size_t used = 0;
      double v = std::stod(t, &used);
      if (used != t.size()) fail("bad number '" + t + "'");
      return v;
    } catch (const std::logic_error&) {
      fail("bad number '" + t + "'");
    }
  }
  std::string token() {
    std::string t;
    if (!(tokens_ >> t)) fail("missing field");
    return t;
  }
  std::string rest() {
    std::string r;
    std::getline(tokens_, r);
    const auto b = r.find_first_not_of(' ');
    return b == std::string::npos ? std::string() : r.substr(b);
  }
  Vec3 vec() {
    double x = num(), y = num(), z = num();
    return Vec3(x, y, z);
  }
  Pose pose() {
    Pose p;
    p.position = vec();
    double w = num(), x = num(), y = num(), z = num();
    p.orientation = Quat(w, x, y, z);
    return p;
  }
  Cuboid cuboid() {
    Cuboid c;
    c.half_extents = vec();
    c.pose = pose();
    return c;
  }
  void done() {
    std::string extra;
    if (tokens_ >> extra) fail("trailing field '" + extra + "'");
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw IoError("scene line " + std::to_string(number_) + ": " + what);
  }

 private:
  std::istringstream in_;
  std::istringstream tokens_;
  std::string line_;
  std::string word_;
  int number_ = 0;
};

AssetInstance read_asset(LineReader& r) {
  AssetInstance a;
  try {
    a.category = category_from_string(r.token());
  } catch (const InvalidInput& e) {
    r.fail(e.what());
  }
  r.done();
  while (r.next()) {
    const std::string& w = r.word();
    if (w == "end") return a;
    if (w == "param") {
      double v = r.num();
      a.params.emplace_back(r.rest(), v);
      continue;
    }
    if (w == "pose") {
      a.pose = r.pose();
    } else if (w == "cuboid") {
      a.cuboids.push_back(r.cuboid());
    } else if (w == "region") {
      SamplingRegion reg;
      std::string kind = r.token();
      if (kind != "tight" && kind != "open") r.fail("region kind must be tight or open");
      reg.tight = kind == "tight";
      reg.approach = r.vec();
      reg.box = r.cuboid();
      a.regions.push_back(reg);
    } else if (w == "hinge") {
      Articulation h;
      h.hinge_point = r.vec();
      h.axis = r.vec();
      h.value = r.num();
      h.limits.lo = r.num();
      h.limits.hi = r.num();
      a.articulations.push_back(h);
    } else {
      r.fail("unexpected '" + w + "' in asset");
    }
    r.done();
  }
  r.fail("unterminated asset");
}

ClutterInstance read_clutter(LineReader& r) {
  ClutterInstance c;
  c.source = r.rest();
  while (r.next()) {
    const std::string& w = r.word();
    if (w == "end") {
      for (const auto& f : c.mesh.faces)
        for (int i : f)
          if (i < 0 || static_cast<std::size_t>(i) >= c.mesh.vertices.size()) r.fail("face index out of range");
      return c;
    }
    if (w == "pose") {
      c.pose = r.pose();
    } else if (w == "scale") {
      c.mesh.scale = r.num();
    } else if (w == "v") {
      c.mesh.vertices.push_back(r.vec());
    } else if (w == "f") {
      int a = static_cast<int>(r.num()), b = static_cast<int>(r.num()), d = static_cast<int>(r.num());
      c.mesh.faces.push_back({a, b, d});
    } else {
      r.fail("unexpected '" + w + "' in clutter");
    }
    r.done();
  }
  r.fail("unterminated clutter");
}

}  // namespace

std::string serialize_scene(const Scene& scene) {
  std::ostringstream out;
  out << "planfactory-scene 1\n";
  out << "seed " << scene.seed << '\n';
  out << "keep_out";
  put(out, scene.keep_out);
  out << '\n';
  put_asset(out, scene.table);
  for (const auto& a : scene.assets) put_asset(out, a);
  for (const auto& c : scene.clutter) {
    out << "clutter " << c.source << '\n';
    out << "pose";
    put(out, c.pose);
    out << '\n';
    out << "scale " << format_double(c.mesh.scale) << '\n';
    for (const auto& v : c.mesh.vertices) {
      out << 'v';
      put(out, v);
      out << '\n';
    }
    for (const auto& f : c.mesh.faces) out << "f " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
    out << "end\n";
  }
  out << "pushes";
  for (int n : scene.log.push_iterations) out << ' ' << n;
  out << '\n';
  out << "dropped " << scene.log.dropped_assets << ' ' << scene.log.dropped_clutter << '\n';
  return out.str();
}

Scene parse_scene(std::string_view text) {
  LineReader r(text);
  if (!r.next() || r.word() != "planfactory-scene" || r.token() != "1") r.fail("not a version 1 scene file");
  Scene s;
  bool have_table = false;
  while (r.next()) {
    const std::string& w = r.word();
    if (w == "seed") {
      const std::string t = r.token();
      try {
        s.seed = std::stoull(t);
      } catch (const std::logic_error&) {
        r.fail("bad seed");
      }
    } else if (w == "keep_out") {
      s.keep_out = r.cuboid();
    } else if (w == "asset") {
      AssetInstance a = read_asset(r);
      if (a.category == AssetCategory::base_table) {
        if (have_table) r.fail("second base table");
        s.table = std::move(a);
        have_table = true;
      } else {
        s.assets.push_back(std::move(a));
      }
      continue;
    } else if (w == "clutter") {
      s.clutter.push_back(read_clutter(r));
      continue;
    } else if (w == "pushes") {
      std::string t;
      while (!(t = r.rest()).empty()) {
        std::istringstream nums(t);
        int n;
        while (nums >> n) s.log.push_iterations.push_back(n);
        if (!nums.eof()) r.fail("bad push count");
      }
    } else if (w == "dropped") {
      s.log.dropped_assets = static_cast<int>(r.num());
      s.log.dropped_clutter = static_cast<int>(r.num());
    } else {
      r.fail("unknown record '" + w + "'");
    }
    r.done();
  }
  if (!have_table) throw IoError("scene file has no base table");
  return s;
}

void write_scene(const std::filesystem::path& path, const Scene& scene) {
  write_file(path.string(), serialize_scene(scene));
}

Scene read_scene(const std::filesystem::path& path) { return parse_scene(read_file(path.string())); }

std::vector<std::pair<std::string, TriMesh>> builtin_mesh_pool() {
  return {{"builtin:cube", make_box_mesh(Vec3::Constant(0.5))},
          {"builtin:cylinder", make_cylinder_mesh(0.5, 1.0)},
          {"builtin:sphere", make_icosphere(0.5, 1)},
          {"builtin:plate", make_box_mesh(Vec3(0.5, 0.5, 0.08))},
          {"builtin:bottle", make_cylinder_mesh(0.2, 1.0)}};
}

std::vector<std::pair<std::string, TriMesh>> load_mesh_pool(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  std::error_code ec;
  for (const auto& e : std::filesystem::directory_iterator(dir, ec)) {
    const auto ext = e.path().extension().string();
    if (e.is_regular_file() && (ext == ".obj" || ext == ".off")) files.push_back(e.path());
  }
  if (ec) throw IoError("cannot list mesh directory " + dir.string() + ": " + ec.message());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no .obj or .off meshes in " + dir.string());
  std::vector<std::pair<std::string, TriMesh>> pool;
  for (const auto& f : files) pool.emplace_back(f.filename().string(), load_mesh(f));
  return pool;
}

}  // namespace planfactory
