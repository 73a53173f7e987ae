#include <algorithm>
#include <cmath>

#include "planfactory/scenegen.hpp"

namespace planfactory {

namespace {

Quat yaw_quat(double yaw) { return Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ())); }

// Collects cuboids and regions in the asset frame (origin at the footprint
// centre on the support plane, opening towards -y), then poses them.
class Builder {
 public:
  Builder(AssetCategory c, const GenConfig& cfg, Rng& rng) : cfg_(cfg), rng_(rng) {
    asset_.category = c;
    section_ = GenConfig::section_of(c);
  }

  double draw(const std::string& key) { return keep(key, cfg_.range(section_, key).sample(rng_)); }
  double draw_centered(const std::string& key) { return keep(key, cfg_.centered(section_, key).sample(rng_)); }
  int draw_count(const std::string& key) {
    auto [lo, hi] = cfg_.count(section_, key);
    return static_cast<int>(keep(key, uniform_int(rng_, lo, hi)));
  }
  double keep(const std::string& key, double v) {
    asset_.params.emplace_back(key, v);
    return v;
  }
  Rng& rng() { return rng_; }
  const GenConfig& cfg() const { return cfg_; }
  const std::string& section() const { return section_; }

  /// Box from min/max corners in the asset frame.
  void box(const Vec3& lo, const Vec3& hi) {
    Cuboid c;
    c.half_extents = 0.5 * (hi - lo);
    c.pose.position = 0.5 * (hi + lo);
    local_.push_back(c);
  }

  /// Door panel hinged on a vertical axis through `hinge`. The closed panel
  /// runs from the hinge along `dir` (+1: +x, -1: -x) in the front plane.
  void door(const Vec3& hinge, double width, double height, double thickness, double angle, int dir,
            Range limits, double value) {
    const double yaw = dir > 0 ? -angle : angle;
    const Quat r = yaw_quat(yaw);
    Cuboid c;
    c.half_extents = Vec3(0.5 * width, 0.5 * thickness, 0.5 * height);
    c.pose.orientation = r;
    c.pose.position = hinge + r * Vec3(dir * 0.5 * width, 0.5 * thickness, 0.5 * height);
    local_.push_back(c);
    Articulation a;
    a.hinge_point = hinge;
    a.axis = Vec3::UnitZ();
    a.value = value;
    a.limits = limits;
    hinges_.push_back(a);
  }

  /// Region from min/max corners; skipped when too thin to hold anything.
  void region(Vec3 lo, Vec3 hi, const Vec3& approach, bool tight, double margin = 0.012) {
    lo.x() += margin;
    lo.y() += margin;
    hi.x() -= margin;
    hi.y() -= margin;
    hi.z() -= margin;
    if (((hi - lo).array() < 0.02).any()) return;
    SamplingRegion r;
    r.box.half_extents = 0.5 * (hi - lo);
    r.box.pose.position = 0.5 * (hi + lo);
    r.approach = approach;
    r.tight = tight;
    regions_.push_back(r);
  }

  AssetInstance finish(const Vec3& position, double yaw) {
    asset_.pose.position = position;
    asset_.pose.orientation = yaw_quat(yaw);
    const Iso3 t = asset_.pose.isometry();
    const Quat q = asset_.pose.orientation;
    for (auto c : local_) {
      c.pose.position = t * c.pose.position;
      c.pose.orientation = (q * c.pose.orientation).normalized();
      asset_.cuboids.push_back(c);
    }
    for (auto r : regions_) {
      r.box.pose.position = t * r.box.pose.position;
      r.box.pose.orientation = q;
      r.approach = q * r.approach;
      asset_.regions.push_back(r);
    }
    for (auto a : hinges_) {
      a.hinge_point = t * a.hinge_point;
      a.axis = q * a.axis;
      asset_.articulations.push_back(a);
    }
    return std::move(asset_);
  }

 private:
  const GenConfig& cfg_;
  Rng& rng_;
  std::string section_;
  AssetInstance asset_;
  std::vector<Cuboid> local_;
  std::vector<SamplingRegion> regions_;
  std::vector<Articulation> hinges_;
};

const double kClear = 0.011;  // resting gap above a support, just over the collision tolerance
const Vec3 kInto = Vec3::UnitY();
const Vec3 kDown = -Vec3::UnitZ();

// The rotation is read as an offset from facing the robot base, centred on
// the middle of its range.
std::pair<Vec3, double> positioned(Builder& b) {
  auto pos = b.cfg().ranges(b.section(), "position range");
  double x = b.keep("position x", pos[0].sample(b.rng()));
  double y = b.keep("position y", pos[1].sample(b.rng()));
  const Range rot = b.cfg().range(b.section(), "z axis rotation range");
  double offset = b.keep("z axis rotation range", rot.sample(b.rng())) - 0.5 * (rot.lo + rot.hi);
  double facing = (x == 0 && y == 0) ? 0.0 : std::atan2(-y, -x) + M_PI / 2;
  return {Vec3(x, y, 0), facing + offset};
}

AssetInstance make_table(Builder& b) {
  const double w = b.draw("width range"), d = b.draw("depth range"), h = b.draw("height range");
  const double t = b.draw("thickness range"), lt = b.draw("leg thickness range"), m = b.draw("leg margin range");
  b.box(Vec3(-w / 2, -d / 2, h - t), Vec3(w / 2, d / 2, h));
  for (int sx : {-1, 1})
    for (int sy : {-1, 1}) {
      Vec3 c(sx * (w / 2 - m), sy * (d / 2 - m), 0);
      b.box(c + Vec3(-lt / 2, -lt / 2, 0), c + Vec3(lt / 2, lt / 2, h - t));
    }
  b.region(Vec3(-w / 2, -d / 2, h + kClear), Vec3(w / 2, d / 2, h + 0.3), kDown, false);
  const double inner = w / 2 - m - lt / 2;
  b.region(Vec3(-inner, -d / 2, kClear), Vec3(inner, d / 2, h - t), kInto, true);
  auto [p, yaw] = positioned(b);
  return b.finish(p, yaw);
}

AssetInstance make_shelf(Builder& b) {
  const double w = b.draw("width range"), d = b.draw("depth range"), h = b.draw("height range");
  const int boards = b.draw_count("num boards range");
  const double bt = b.draw("board thickness range");
  const double back = b.draw("backboard thickness range");
  const int verticals = b.draw_count("num vertical boards range");
  const int columns = b.draw_count("num side columns range");
  const double ct = b.draw("column thickness range");
  const double x_in = w / 2 - ct;
  const double y_back = d / 2 - back;
  // Side panels carry the boards, which end flush with their inner faces.
  b.box(Vec3(-w / 2, -d / 2, 0), Vec3(-x_in, d / 2, h));
  b.box(Vec3(x_in, -d / 2, 0), Vec3(w / 2, d / 2, h));
  if (back > 0) b.box(Vec3(-x_in, y_back, 0), Vec3(x_in, d / 2, h));
  std::vector<double> z;
  for (int i = 0; i < boards; ++i) {
    z.push_back(i * (h - bt) / (boards - 1));
    b.box(Vec3(-x_in, -d / 2, z.back()), Vec3(x_in, y_back, z.back() + bt));
  }
  std::vector<double> xs = {-x_in};
  for (int k = 1; k <= verticals; ++k) {
    double x = -x_in + k * 2 * x_in / (verticals + 1);
    b.box(Vec3(x - bt / 2, -d / 2, bt), Vec3(x + bt / 2, y_back, h - bt));
    xs.push_back(x);
  }
  xs.push_back(x_in);
  // Extra posts hug the outside of the panels: front-left, front-right, back-left, back-right.
  for (int k = 0; k < columns; ++k) {
    double sx = (k % 2 == 0) ? -1 : 1;
    double sy = (k < 2) ? -1 : 1;
    Vec3 lo(sx < 0 ? -w / 2 - ct : w / 2, sy < 0 ? -d / 2 : d / 2 - ct, 0);
    b.box(lo, lo + Vec3(ct, ct, h));
  }
  for (int i = 0; i + 1 < boards; ++i)
    for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
      double x0 = xs[k] + (k == 0 ? 0 : bt / 2), x1 = xs[k + 1] - (k + 2 == xs.size() ? 0 : bt / 2);
      b.region(Vec3(x0, -d / 2, z[static_cast<std::size_t>(i)] + bt + kClear),
               Vec3(x1, y_back, z[static_cast<std::size_t>(i) + 1]), kInto, true);
    }
  auto [p, yaw] = positioned(b);
  return b.finish(p, yaw);
}

AssetInstance make_open_box(Builder& b) {
  const double w = b.draw("width range"), d = b.draw("depth range"), h = b.draw("height range");
  const double t = b.draw("thickness range"), fs = b.draw("front scale range");
  b.box(Vec3(-w / 2, -d / 2, 0), Vec3(w / 2, d / 2, t));
  b.box(Vec3(-w / 2, -d / 2, 0), Vec3(-w / 2 + t, d / 2, h));
  b.box(Vec3(w / 2 - t, -d / 2, 0), Vec3(w / 2, d / 2, h));
  b.box(Vec3(-w / 2 + t, d / 2 - t, 0), Vec3(w / 2 - t, d / 2, h));
  b.box(Vec3(-w / 2 + t, -d / 2, 0), Vec3(w / 2 - t, -d / 2 + t, fs * h));
  b.region(Vec3(-w / 2 + t, -d / 2 + t, t + kClear), Vec3(w / 2 - t, d / 2 - t, h), kDown, true);
  auto [p, yaw] = positioned(b);
  return b.finish(p, yaw);
}

AssetInstance make_cubby(Builder& b) {
  // The rows are absolute positions in the robot frame; the cubby is built
  // facing the robot (-x) and then turned about the robot and itself.
  const std::string s = b.section();
  const auto& cfg = b.cfg();
  double left = 0, right = 0, top = 0, bottom = 0, front = 0, width = 0, zmid = 0, ymid = 0, bt = 0;
  for (int attempt = 0;; ++attempt) {
    left = cfg.centered(s, "cubby left range").sample(b.rng());
    right = cfg.centered(s, "cubby right range").sample(b.rng());
    top = cfg.centered(s, "cubby top range").sample(b.rng());
    bottom = cfg.centered(s, "cubby bottom range").sample(b.rng());
    front = cfg.centered(s, "cubby front range").sample(b.rng());
    width = cfg.centered(s, "cubby width range").sample(b.rng());
    zmid = cfg.centered(s, "cubby horizontal middle board z axis shift range").sample(b.rng());
    ymid = cfg.centered(s, "cubby vertical middle board y axis shift range").sample(b.rng());
    bt = cfg.centered(s, "board thickness range").sample(b.rng());
    const double room = 0.05;
    bool ok = width > 2 * bt + room && zmid - bt / 2 > bottom + bt + room && zmid + bt / 2 < top - bt - room &&
              ymid - bt / 2 > right + bt + room && ymid + bt / 2 < left - bt - room;
    if (ok) break;
    if (attempt > 1000) throw InvalidInput("cubby ranges leave no room for the middle boards");
  }
  b.keep("cubby left range", left);
  b.keep("cubby right range", right);
  b.keep("cubby top range", top);
  b.keep("cubby bottom range", bottom);
  b.keep("cubby front range", front);
  b.keep("cubby width range", width);
  b.keep("cubby horizontal middle board z axis shift range", zmid);
  b.keep("cubby vertical middle board y axis shift range", ymid);
  b.keep("board thickness range", bt);
  const double ext = b.draw("external rotation range");
  const double internal = b.draw("internal rotation range");
  b.draw_count("num shelves range");

  // Asset frame: x runs from the robot's left (+y) to its right, y is depth.
  const double w = left - right, d = width, h = top - bottom;
  const double xm = (left + right) / 2 - ymid;  // middle board in the asset frame
  const double zm = zmid - bottom;
  const double xi = w / 2 - bt;
  b.box(Vec3(-w / 2, -d / 2, 0), Vec3(-xi, d / 2, h));
  b.box(Vec3(xi, -d / 2, 0), Vec3(w / 2, d / 2, h));
  b.box(Vec3(-xi, d / 2 - bt, 0), Vec3(xi, d / 2, h));
  b.box(Vec3(-xi, -d / 2, 0), Vec3(xi, d / 2 - bt, bt));
  b.box(Vec3(-xi, -d / 2, h - bt), Vec3(xi, d / 2 - bt, h));
  b.box(Vec3(-xi, -d / 2, zm - bt / 2), Vec3(xi, d / 2 - bt, zm + bt / 2));
  b.box(Vec3(xm - bt / 2, -d / 2, bt), Vec3(xm + bt / 2, d / 2 - bt, h - bt));
  for (auto [z0, z1] : {std::pair{bt, zm - bt / 2}, std::pair{zm + bt / 2, h - bt}}) {
    b.region(Vec3(-xi, -d / 2, z0 + kClear), Vec3(xm - bt / 2, d / 2 - bt, z1), kInto, true);
    b.region(Vec3(xm + bt / 2, -d / 2, z0 + kClear), Vec3(xi, d / 2 - bt, z1), kInto, true);
  }
  const Vec3 nominal(front + d / 2, (left + right) / 2, 0);
  const Vec3 centre = Eigen::AngleAxisd(ext, Vec3::UnitZ()) * nominal;
  return b.finish(centre, -M_PI / 2 + ext + internal);
}

// Placement at a distance from the robot along a direction, facing it.
std::pair<Vec3, double> polar(Builder& b, bool internal_yaw = true) {
  const double dist = b.draw("distance range");
  const double ext = b.draw("external z axis rotation range");
  const double internal = internal_yaw ? b.draw("internal z axis rotation range") : 0.0;
  const Vec3 centre = Eigen::AngleAxisd(ext, Vec3::UnitZ()) * Vec3(0, dist, 0);
  return {centre, ext + internal};
}

AssetInstance make_microwave(Builder& b) {
  const double w = b.draw("width range"), d = b.draw("depth range"), h = b.draw("height range");
  const double t = b.draw("thickness range"), p = b.draw("display panel width range");
  auto [centre, yaw] = polar(b, false);
  // The internal rotation drives the door, measured from fully open.
  const Range door_range = b.cfg().range(b.section(), "internal z axis rotation range");
  const double door_offset = b.keep("internal z axis rotation range", door_range.sample(b.rng()));
  b.box(Vec3(-w / 2, -d / 2, 0), Vec3(w / 2, d / 2, t));
  b.box(Vec3(-w / 2, -d / 2, h - t), Vec3(w / 2, d / 2, h));
  b.box(Vec3(-w / 2, -d / 2, t), Vec3(-w / 2 + t, d / 2, h - t));
  b.box(Vec3(w / 2 - t, -d / 2, t), Vec3(w / 2, d / 2, h - t));
  b.box(Vec3(-w / 2 + t, d / 2 - t, t), Vec3(w / 2 - t, d / 2, h - t));
  // Electronics bay behind the display panel.
  b.box(Vec3(w / 2 - t - p, -d / 2, t), Vec3(w / 2 - t, d / 2 - t, h - t));
  b.door(Vec3(-w / 2, -d / 2, 0), w - t - p, h, t, M_PI / 2 + door_offset, +1, door_range, door_offset);
  b.region(Vec3(-w / 2 + t, -d / 2, t + kClear), Vec3(w / 2 - t - p, d / 2 - t, h - t), kInto, true);
  return b.finish(centre, yaw);
}

AssetInstance make_dishwasher(Builder& b) {
  const double w = b.draw("width range"), d = b.draw("depth range"), h = b.draw("height range");
  const double cp = b.draw("control panel height range"), fp = b.draw("foot panel height range");
  const double t = b.draw("wall thickness range");
  const Range open_range = b.cfg().range(b.section(), "opening angle range");
  const double open = b.keep("opening angle range", open_range.sample(b.rng()));
  auto [centre, yaw] = polar(b);
  b.box(Vec3(-w / 2, -d / 2, 0), Vec3(w / 2, d / 2, t));
  b.box(Vec3(-w / 2, -d / 2, h - t), Vec3(w / 2, d / 2, h));
  b.box(Vec3(-w / 2, -d / 2, t), Vec3(-w / 2 + t, d / 2, h - t));
  b.box(Vec3(w / 2 - t, -d / 2, t), Vec3(w / 2, d / 2, h - t));
  b.box(Vec3(-w / 2 + t, d / 2 - t, t), Vec3(w / 2 - t, d / 2, h - t));
  b.box(Vec3(-w / 2 + t, -d / 2, h - cp), Vec3(w / 2 - t, -d / 2 + t, h - t));
  b.box(Vec3(-w / 2 + t, -d / 2, t), Vec3(w / 2 - t, -d / 2 + t, fp));
  b.door(Vec3(-w / 2, -d / 2, fp), w, h - cp - fp, t, open, +1, open_range, open);
  b.region(Vec3(-w / 2 + t, -d / 2 + t, fp + kClear), Vec3(w / 2 - t, d / 2 - t, h - cp), kInto, true);
  return b.finish(centre, yaw);
}

AssetInstance make_cabinet(Builder& b) {
  const double w = b.draw("width range"), d = b.draw("depth range"), h = b.draw("height range");
  const double t = b.draw("wall thickness range");
  const Range lr = b.cfg().range(b.section(), "left opening angle range");
  const Range rr = b.cfg().range(b.section(), "right opening angle range");
  const double la = b.keep("left opening angle range", lr.sample(b.rng()));
  const double ra = b.keep("right opening angle range", rr.sample(b.rng()));
  auto [centre, yaw] = polar(b);
  b.box(Vec3(-w / 2, -d / 2, 0), Vec3(w / 2, d / 2, t));
  b.box(Vec3(-w / 2, -d / 2, h - t), Vec3(w / 2, d / 2, h));
  b.box(Vec3(-w / 2, -d / 2, t), Vec3(-w / 2 + t, d / 2, h - t));
  b.box(Vec3(w / 2 - t, -d / 2, t), Vec3(w / 2, d / 2, h - t));
  b.box(Vec3(-w / 2 + t, d / 2 - t, t), Vec3(w / 2 - t, d / 2, h - t));
  b.box(Vec3(-w / 2 + t, -d / 2, h / 2 - t / 2), Vec3(w / 2 - t, d / 2 - t, h / 2 + t / 2));
  b.door(Vec3(-w / 2, -d / 2, 0), w / 2, h, t, la, +1, lr, la);
  b.door(Vec3(w / 2, -d / 2, 0), w / 2, h, t, ra, -1, rr, ra);
  b.region(Vec3(-w / 2 + t, -d / 2 + t, t + kClear), Vec3(w / 2 - t, d / 2 - t, h / 2 - t / 2), kInto, true);
  b.region(Vec3(-w / 2 + t, -d / 2 + t, h / 2 + t / 2 + kClear), Vec3(w / 2 - t, d / 2 - t, h - t), kInto, true);
  return b.finish(centre, yaw);
}

}  // namespace

const char* to_string(AssetCategory c) {
  switch (c) {
    case AssetCategory::table: return "table";
    case AssetCategory::shelf: return "shelf";
    case AssetCategory::open_box: return "open_box";
    case AssetCategory::cubby: return "cubby";
    case AssetCategory::microwave: return "microwave";
    case AssetCategory::dishwasher: return "dishwasher";
    case AssetCategory::cabinet: return "cabinet";
    case AssetCategory::base_table: return "base_table";
  }
  return "?";
}

AssetCategory category_from_string(std::string_view name) {
  for (auto c : kSampledCategories)
    if (name == to_string(c)) return c;
  if (name == "base_table") return AssetCategory::base_table;
  throw InvalidInput("unknown asset category: " + std::string(name));
}

AssetInstance generate_asset(AssetCategory category, const GenConfig& cfg, Rng& rng) {
  Builder b(category, cfg, rng);
  switch (category) {
    case AssetCategory::table: return make_table(b);
    case AssetCategory::shelf: return make_shelf(b);
    case AssetCategory::open_box: return make_open_box(b);
    case AssetCategory::cubby: return make_cubby(b);
    case AssetCategory::microwave: return make_microwave(b);
    case AssetCategory::dishwasher: return make_dishwasher(b);
    case AssetCategory::cabinet: return make_cabinet(b);
    case AssetCategory::base_table: break;
  }
  throw InvalidInput("generate_asset does not build the base table");
}

void AssetInstance::translate(const Vec3& d) {
  pose.position += d;
  for (auto& c : cuboids) c.pose.position += d;
  for (auto& r : regions) r.box.pose.position += d;
  for (auto& a : articulations) a.hinge_point += d;
}

Cuboid AssetInstance::bounding_box() const {
  const Iso3 inv = pose.isometry().inverse();
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& c : cuboids)
    for (const auto& corner : c.corners()) {
      Vec3 p = inv * corner;
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
  Cuboid box;
  box.half_extents = 0.5 * (hi - lo);
  box.pose.orientation = pose.orientation;
  box.pose.position = pose.isometry() * (0.5 * (hi + lo));
  return box;
}

std::optional<double> AssetInstance::param(std::string_view name) const {
  for (const auto& [k, v] : params)
    if (k == name) return v;
  return std::nullopt;
}

}  // namespace planfactory
