#pragma once

// Hot loops of the collision and scoring paths, each in two versions:
//   serial::   plain nested loops, the reference used by the tests
//   parallel:: OpenMP over the outer loop plus spatial-hash culling
// Both must agree exactly; bench/bench_kernels compares their speed.

#include <cstdint>
#include <span>
#include <vector>

#include "planfactory/geometry.hpp"
#include "planfactory/kinematics.hpp"

namespace planfactory::kernels {

/// One robot sphere set, e.g. the placed spheres of a single waypoint.
using SphereSet = std::vector<Sphere>;

namespace serial {

/// min_i ‖p − c_i‖ − r_i. Returns +inf for an empty set.
double sphere_set_sdf(std::span<const Sphere> spheres, const Vec3& p);

std::vector<double> sdf_batch(std::span<const Sphere> spheres, std::span<const Vec3> points);

/// Number of points with sphere_set_sdf < eps.
std::uint64_t count_violations(std::span<const Sphere> spheres, std::span<const Vec3> points, double eps);

/// count_violations for every set.
std::vector<std::uint64_t> count_violations_sets(std::span<const SphereSet> sets,
                                                 std::span<const Vec3> points, double eps);

}  // namespace serial

namespace parallel {

std::vector<double> sdf_batch(std::span<const Sphere> spheres, std::span<const Vec3> points);

std::uint64_t count_violations(std::span<const Sphere> spheres, std::span<const Vec3> points, double eps);

/// Sets are distributed over threads; `index` must be built over `points`.
std::vector<std::uint64_t> count_violations_sets(std::span<const SphereSet> sets,
                                                 std::span<const Vec3> points,
                                                 const SpatialHash& index, double eps);

}  // namespace parallel

/// Single-threaded indexed count: visits only points near some sphere.
/// `stamp` is caller-owned scratch sized to the point count.
std::uint64_t count_violations_indexed(std::span<const Sphere> spheres, std::span<const Vec3> points,
                                       const SpatialHash& index, double eps,
                                       std::vector<std::uint32_t>& stamp, std::uint32_t& epoch);

/// Whether any point violates; stops at the first hit.
bool any_violation_indexed(std::span<const Sphere> spheres, std::span<const Vec3> points,
                           const SpatialHash& index, double eps);

/// Number of worker threads OpenMP will use.
int max_threads();

}  // namespace planfactory::kernels
