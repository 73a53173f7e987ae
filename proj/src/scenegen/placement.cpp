#include <algorithm>
#include <cmath>

#include "planfactory/scenegen.hpp"

namespace planfactory {

namespace {

using Vec2 = Eigen::Vector2d;

struct Footprint {
  std::array<Vec2, 4> corners;
  double z_lo = 0;
  double z_hi = 0;
};

Footprint footprint(const Cuboid& c) {
  const Eigen::Matrix3d r = c.pose.orientation.toRotationMatrix();
  if (std::abs(r(2, 2) - 1.0) > 1e-9) throw InvalidInput("scene boxes must be rotated about z only");
  Footprint f;
  const Vec2 ex = r.block<2, 1>(0, 0) * c.half_extents.x();
  const Vec2 ey = r.block<2, 1>(0, 1) * c.half_extents.y();
  const Vec2 o = c.pose.position.head<2>();
  f.corners = {o - ex - ey, o + ex - ey, o + ex + ey, o - ex + ey};
  f.z_lo = c.pose.position.z() - c.half_extents.z();
  f.z_hi = c.pose.position.z() + c.half_extents.z();
  return f;
}

std::pair<double, double> project(const Footprint& f, const Vec2& u) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& p : f.corners) {
    double d = p.dot(u);
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  return {lo, hi};
}

std::array<Vec2, 4> axes(const Footprint& a, const Footprint& b) {
  return {(a.corners[1] - a.corners[0]).normalized(), (a.corners[3] - a.corners[0]).normalized(),
          (b.corners[1] - b.corners[0]).normalized(), (b.corners[3] - b.corners[0]).normalized()};
}

double point_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (a + t * ab - p).norm();
}

double polygon_distance(const Footprint& a, const Footprint& b) {
  bool separated = false;
  for (const auto& u : axes(a, b)) {
    auto [alo, ahi] = project(a, u);
    auto [blo, bhi] = project(b, u);
    if (alo > bhi || blo > ahi) separated = true;
  }
  if (!separated) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      best = std::min(best, point_segment(a.corners[static_cast<std::size_t>(i)], b.corners[static_cast<std::size_t>(j)],
                                          b.corners[static_cast<std::size_t>((j + 1) % 4)]));
      best = std::min(best, point_segment(b.corners[static_cast<std::size_t>(i)], a.corners[static_cast<std::size_t>(j)],
                                          a.corners[static_cast<std::size_t>((j + 1) % 4)]));
    }
  return best;
}

}  // namespace

double box_distance(const Cuboid& a, const Cuboid& b) {
  const Footprint fa = footprint(a), fb = footprint(b);
  const double dz = std::max({0.0, fa.z_lo - fb.z_hi, fb.z_lo - fa.z_hi});
  return std::hypot(polygon_distance(fa, fb), dz);
}

std::optional<Vec3> separating_push(const Cuboid& a, const Cuboid& b, double gap) {
  if (box_distance(a, b) >= gap) return std::nullopt;
  const Footprint fa = footprint(a), fb = footprint(b);
  double best = std::numeric_limits<double>::infinity();
  Vec2 dir = Vec2::Zero();
  for (const auto& u : axes(fa, fb)) {
    auto [alo, ahi] = project(fa, u);
    auto [blo, bhi] = project(fb, u);
    const double forward = bhi - alo + gap;  // move a along +u past b
    const double backward = ahi - blo + gap;
    if (forward < best) {
      best = forward;
      dir = u;
    }
    if (backward < best) {
      best = backward;
      dir = -u;
    }
  }
  return Vec3(dir.x(), dir.y(), 0.0) * best;
}

bool PlacementWorld::collides(const std::vector<Cuboid>& shape) const {
  for (const auto& item : items)
    for (const auto& c : item)
      for (const auto& s : shape)
        if (box_distance(s, c) < tolerance) return true;
  return false;
}

void Placeable::translate(const Vec3& d) {
  for (auto& c : shape) c.pose.position += d;
  bounds.pose.position += d;
}

std::optional<int> place_with_normal_push(const PlacementWorld& world, Placeable& item, int max_iters, Rng& rng) {
  const double min_step = 0.02;
  // Aim a hair past the tolerance so re-applying the shift elsewhere cannot
  // round back under it.
  const double gap = world.tolerance + 1e-6;
  for (int iter = 0;; ++iter) {
    Vec3 normal = Vec3::Zero();
    double depth = 0.0;
    bool hit = false;
    for (const auto& other : world.items) {
      Vec3 n_i = Vec3::Zero();
      bool touching = false;
      for (const auto& c : other) {
        bool close = false;
        for (const auto& s : item.shape)
          if (box_distance(s, c) < world.tolerance) {
            close = true;
            break;
          }
        if (!close) continue;
        touching = true;
        if (auto push = separating_push(item.bounds, c, gap)) {
          n_i += *push;
          depth = std::max(depth, push->norm());
        }
      }
      if (!touching) continue;
      hit = true;
      if (n_i.norm() > 1e-12) normal += n_i.normalized();
    }
    if (!hit) return iter;
    if (iter == max_iters) return std::nullopt;
    const double step = std::max(depth, min_step);
    if (normal.norm() < 1e-9) {
      // Symmetric wedge: no preferred direction, so pick one at random.
      const double a = uniform(rng, 0.0, 2.0 * M_PI);
      normal = Vec3(std::cos(a), std::sin(a), 0.0);
    }
    item.translate(step * normal.normalized());
  }
}

std::optional<int> place_with_normal_push(const PlacementWorld& world, AssetInstance& asset, int max_iters, Rng& rng) {
  Placeable p{asset.cuboids, asset.bounding_box()};
  const Vec3 start = p.bounds.pose.position;
  auto iters = place_with_normal_push(world, p, max_iters, rng);
  if (iters) asset.translate(p.bounds.pose.position - start);
  return iters;
}

Cuboid ClutterInstance::bounding_box() const {
  WorkspaceBox b = mesh.bounds();
  Cuboid c;
  c.half_extents = 0.5 * (b.max - b.min);
  c.pose.orientation = pose.orientation;
  c.pose.position = pose.isometry() * (0.5 * (b.max + b.min));
  return c;
}

}  // namespace planfactory
