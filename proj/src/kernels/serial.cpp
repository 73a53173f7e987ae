#include <limits>

#include "planfactory/kernels.hpp"

namespace planfactory::kernels::serial {

double sphere_set_sdf(std::span<const Sphere> spheres, const Vec3& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : spheres) {
    double d = (p - s.center).norm() - s.radius;
    if (d < best) best = d;
  }
  return best;
}

std::vector<double> sdf_batch(std::span<const Sphere> spheres, std::span<const Vec3> points) {
  std::vector<double> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) out[i] = sphere_set_sdf(spheres, points[i]);
  return out;
}

std::uint64_t count_violations(std::span<const Sphere> spheres, std::span<const Vec3> points, double eps) {
  std::uint64_t n = 0;
  for (const auto& p : points)
    if (sphere_set_sdf(spheres, p) < eps) ++n;
  return n;
}

std::vector<std::uint64_t> count_violations_sets(std::span<const SphereSet> sets,
                                                 std::span<const Vec3> points, double eps) {
  std::vector<std::uint64_t> out(sets.size());
  for (std::size_t s = 0; s < sets.size(); ++s) out[s] = count_violations(sets[s], points, eps);
  return out;
}

}  // namespace planfactory::kernels::serial
