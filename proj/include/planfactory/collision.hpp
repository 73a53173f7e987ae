#pragma once

#include <optional>
#include <span>
#include <vector>

#include "planfactory/geometry.hpp"
#include "planfactory/kinematics.hpp"

namespace planfactory {

/// Signed distance from p to the union of spheres (negative inside).
/// Throws InvalidInput for an empty set.
double sphere_set_sdf(std::span<const Sphere> spheres, const Vec3& p);

/// Obstacles as seen by the robot: a point cloud (indexed by a hash grid)
/// plus analytic cuboids. Immutable after construction.
class CollisionWorld {
 public:
  static constexpr double kDefaultEps = 0.01;

  CollisionWorld() : CollisionWorld(PointCloud{}, {}) {}
  CollisionWorld(PointCloud cloud, std::vector<Cuboid> cuboids, double eps = kDefaultEps,
                 double cell = 0.1);

  const PointCloud& cloud() const { return cloud_; }
  const std::vector<Cuboid>& cuboids() const { return cuboids_; }
  const SpatialHash& index() const { return index_; }
  double eps() const { return eps_; }

  /// Copy with a different tolerance; the cloud index is rebuilt.
  CollisionWorld with_eps(double eps) const;

  /// Whether any sphere comes within eps of a cuboid.
  bool cuboid_violation(std::span<const Sphere> spheres) const;
  std::size_t count_cloud_violations(std::span<const Sphere> spheres) const;
  bool any_cloud_violation(std::span<const Sphere> spheres) const;
  /// Largest ∞-norm joint move that provably keeps every sphere at least eps
  /// from every obstacle, given per-sphere displacement bounds (m per rad),
  /// capped at `cap`. Negative when a sphere already violates.
  double safe_radius(std::span<const Sphere> spheres, std::span<const double> bounds, double cap) const;

 private:
  PointCloud cloud_;
  std::vector<Cuboid> cuboids_;
  std::vector<double> cuboid_radius_;
  double eps_;
  SpatialHash index_;
};

enum class InHandPrimitive : std::uint8_t { box = 0, cylinder = 1, sphere = 2, mesh = 3 };

/// Object held between the fingers. Dimensions are full extents in the
/// object frame (cylinder: diameter, diameter, height).
struct InHandObject {
  InHandPrimitive primitive = InHandPrimitive::box;
  Vec3 dims = Vec3::Constant(0.05);
  /// Object frame relative to the end-effector frame.
  Pose grasp;
  /// Proxy geometry for mesh objects, centered in the object frame.
  std::optional<TriMesh> mesh;

  double longest_dimension() const { return dims.maxCoeff(); }
  /// Sphere covering in the object frame (at most 32 spheres), containing the primitive.
  std::vector<Sphere> covering() const;
  /// Surface samples in the object frame.
  PointCloud sample_surface(std::size_t n, Rng& rng) const;
  /// Signed distance of an object-frame point to the exact primitive.
  double exact_sdf(const Vec3& p) const;
};

struct InHandConfig {
  double ratio = 0.5;
  Vec3 size_lo = Vec3::Constant(0.03);
  Vec3 size_hi = Vec3::Constant(0.3);
  Vec3 offset_lo = Vec3(-0.05, -0.05, 0.0);
  Vec3 offset_hi = Vec3(0.05, 0.05, 0.05);
};

/// Object of the given shape; sphere and cylinder dims are made consistent
/// from dims.x(), and a mesh gets its proxy geometry.
InHandObject make_in_hand_object(InHandPrimitive primitive, const Vec3& dims);

/// Draws a primitive and its dimensions from the configured ranges.
InHandObject sample_in_hand_object(const InHandConfig& cfg, Rng& rng);

/// Places the object at a uniform offset inside the spawn cube around the
/// end-effector point, with a uniform yaw about the approach axis.
InHandObject attach_in_hand(InHandObject obj, const InHandConfig& cfg, Rng& rng);

/// The robot as a set of spheres: chain, sphere model, optional held object.
class RobotBody {
 public:
  RobotBody(const KinematicChain& chain, const SphereModel& model,
            std::optional<InHandObject> in_hand = std::nullopt);

  const KinematicChain& chain() const { return *chain_; }
  const SphereModel& model() const { return *model_; }
  const std::optional<InHandObject>& in_hand() const { return in_hand_; }
  RobotBody with_in_hand(std::optional<InHandObject> obj) const;

  std::vector<Sphere> spheres(const JointConfig& q) const;
  std::vector<Sphere> spheres(const FkResult& fk) const;
  /// Index of the first in-hand sphere in spheres(); equals the model size.
  std::size_t in_hand_offset() const { return model_->size(); }
  /// Per sphere of spheres(): how far its center can move per radian of
  /// ∞-norm joint motion, from any configuration.
  const std::vector<double>& motion_bounds() const { return motion_bounds_; }

 private:
  const KinematicChain* chain_;
  const SphereModel* model_;
  std::optional<InHandObject> in_hand_;
  std::vector<Sphere> in_hand_local_;
  std::vector<double> motion_bounds_;
};

struct CollisionResult {
  bool colliding = false;
  std::size_t violating_points = 0;
};

CollisionResult config_collision(const CollisionWorld& world, const RobotBody& body, const JointConfig& q);
/// Boolean-only variant that stops at the first violation.
bool in_collision(const CollisionWorld& world, const RobotBody& body, const JointConfig& q);

struct SegmentResult {
  PointCloud cloud;
  std::size_t removed = 0;
};

/// Drops points whose robot SDF (including any held object) is below eps.
SegmentResult segment_robot(const PointCloud& cloud, const RobotBody& body, const JointConfig& q,
                            double eps = 0.01);

/// Checks configurations along the straight segment at ∞-norm spacing no
/// larger than `resolution`, endpoints included. Between samples the motion
/// bounds must show that no sphere can reach an obstacle; stretches they do
/// not cover are bisected. So a true result holds for every configuration
/// on the segment, not just the samples.
bool edge_collision_free(const CollisionWorld& world, const RobotBody& body, const JointConfig& q1,
                         const JointConfig& q2, double resolution = 0.01);

/// Number of interpolation steps edge_collision_free uses for this segment.
std::size_t edge_steps(const JointConfig& q1, const JointConfig& q2, double resolution);

}  // namespace planfactory
