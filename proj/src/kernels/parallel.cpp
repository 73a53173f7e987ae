#include <omp.h>

#include <limits>

#include "planfactory/kernels.hpp"

namespace planfactory::kernels {

namespace {

// Slack on culling bounds so that every culled point is also rejected by the
// exact test under rounding.
constexpr double kCullSlack = 1e-9;

struct Aabb {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());
  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
};

Aabb inflated_bounds(std::span<const Sphere> spheres, double eps) {
  Aabb box;
  for (const auto& s : spheres) {
    Vec3 r = Vec3::Constant(s.radius + eps + kCullSlack);
    box.lo = box.lo.cwiseMin(s.center - r);
    box.hi = box.hi.cwiseMax(s.center + r);
  }
  return box;
}

}  // namespace

int max_threads() { return omp_get_max_threads(); }

namespace parallel {

std::vector<double> sdf_batch(std::span<const Sphere> spheres, std::span<const Vec3> points) {
  std::vector<double> out(points.size());
  const auto n = static_cast<std::int64_t>(points.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] = serial::sphere_set_sdf(spheres, points[static_cast<std::size_t>(i)]);
  return out;
}

std::uint64_t count_violations(std::span<const Sphere> spheres, std::span<const Vec3> points, double eps) {
  if (spheres.empty()) return 0;
  const Aabb box = inflated_bounds(spheres, eps);
  const auto n = static_cast<std::int64_t>(points.size());
  std::uint64_t total = 0;
#pragma omp parallel for schedule(static) reduction(+ : total)
  for (std::int64_t i = 0; i < n; ++i) {
    const Vec3& p = points[static_cast<std::size_t>(i)];
    if (!box.contains(p)) continue;
    for (const auto& s : spheres) {
      if ((p - s.center).norm() - s.radius < eps) {
        ++total;
        break;
      }
    }
  }
  return total;
}

std::vector<std::uint64_t> count_violations_sets(std::span<const SphereSet> sets,
                                                 std::span<const Vec3> points,
                                                 const SpatialHash& index, double eps) {
  std::vector<std::uint64_t> out(sets.size(), 0);
  const auto n = static_cast<std::int64_t>(sets.size());
#pragma omp parallel
  {
    std::vector<std::uint32_t> stamp(points.size(), 0);
    std::uint32_t epoch = 0;
#pragma omp for schedule(dynamic, 4)
    for (std::int64_t s = 0; s < n; ++s)
      out[static_cast<std::size_t>(s)] =
          count_violations_indexed(sets[static_cast<std::size_t>(s)], points, index, eps, stamp, epoch);
  }
  return out;
}

}  // namespace parallel

std::uint64_t count_violations_indexed(std::span<const Sphere> spheres, std::span<const Vec3> points,
                                       const SpatialHash& index, double eps,
                                       std::vector<std::uint32_t>& stamp, std::uint32_t& epoch) {
  if (spheres.empty() || points.empty()) return 0;
  if (stamp.size() != points.size()) stamp.assign(points.size(), 0);
  if (++epoch == 0) {
    std::fill(stamp.begin(), stamp.end(), 0);
    epoch = 1;
  }
  std::uint64_t count = 0;
  for (const auto& s : spheres) {
    index.for_each_near(s.center, s.radius + eps + kCullSlack, [&](std::uint32_t j) {
      if (stamp[j] == epoch) return;
      if ((points[j] - s.center).norm() - s.radius < eps) {
        stamp[j] = epoch;
        ++count;
      }
    });
  }
  return count;
}

bool any_violation_indexed(std::span<const Sphere> spheres, std::span<const Vec3> points,
                           const SpatialHash& index, double eps) {
  // for_each_near has no early exit, so the hit is latched and the remaining
  // candidates in the current sphere's cells are skipped cheaply.
  bool hit = false;
  for (const auto& s : spheres) {
    index.for_each_near(s.center, s.radius + eps + kCullSlack, [&](std::uint32_t j) {
      if (!hit && (points[j] - s.center).norm() - s.radius < eps) hit = true;
    });
    if (hit) return true;
  }
  return false;
}

}  // namespace planfactory::kernels
