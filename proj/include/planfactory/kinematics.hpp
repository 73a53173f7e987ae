#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "planfactory/common.hpp"

namespace planfactory {

/// One revolute joint: a fixed transform from the parent link frame to the
/// joint frame, followed by a rotation about `axis` (joint frame).
struct JointSpec {
  Vec3 offset = Vec3::Zero();
  Quat rotation = Quat::Identity();
  Vec3 axis = Vec3::UnitZ();
  double lower = -M_PI;
  double upper = M_PI;
};

/// Serial chain of revolute joints. Link 0 is the base; link i (1..dof) is
/// the frame after joint i. The end effector is a fixed offset from the
/// last link. Immutable after construction.
class KinematicChain {
 public:
  KinematicChain(std::vector<JointSpec> joints, Pose ee_offset, JointConfig rest);

  /// Reads the `[chain]` / repeated `[joint]` key-value format.
  static KinematicChain parse(std::string_view text);
  static KinematicChain load(const std::filesystem::path& path);
  /// Canonical text form; `parse(serialize())` reproduces the chain exactly.
  std::string serialize() const;
  /// FNV-1a of the canonical text, stored in dataset headers.
  std::uint64_t hash() const;

  std::size_t dof() const { return joints_.size(); }
  const std::vector<JointSpec>& joints() const { return joints_; }
  const Pose& ee_offset() const { return ee_offset_; }
  const JointConfig& rest() const { return rest_; }
  JointConfig lower() const;
  JointConfig upper() const;

  bool within_limits(const JointConfig& q) const;
  JointConfig clamp(const JointConfig& q) const;
  JointConfig sample_uniform(Rng& rng) const;
  /// Throws InvalidInput when q has the wrong length or a non-finite entry.
  void check_config(const JointConfig& q) const;

 private:
  std::vector<JointSpec> joints_;
  Pose ee_offset_;
  JointConfig rest_;
};

/// Link frames (dof + 1, base first) and the end-effector frame.
struct FkResult {
  std::vector<Iso3> links;
  Iso3 ee = Iso3::Identity();
};

FkResult forward_kinematics(const KinematicChain& chain, const JointConfig& q);

/// 6×dof geometric Jacobian of the end effector (linear rows first), world frame.
Eigen::Matrix<double, 6, Eigen::Dynamic> ee_jacobian(const KinematicChain& chain,
                                                      const FkResult& fk);

struct IkOptions {
  double damping = 0.05;
  double max_step = 0.2;          // rad, ∞-norm clamp per iteration
  double position_tol = 1e-4;     // m, convergence threshold
  double orientation_tol = 1e-3;  // rad
  int max_iterations = 200;       // per attempt
  int max_attempts = 8;           // attempt 0 starts at the seed, the rest perturb it
  double restart_sigma = 0.3;     // rad, std-dev of restart perturbations
  /// Wall-clock bound over all attempts. Unset means iteration budget only,
  /// which keeps the solver deterministic.
  std::optional<std::chrono::microseconds> timeout = std::chrono::milliseconds(10);
  std::uint64_t restart_seed = 0x1c0ffee;
};

/// Position and axis-angle orientation error between two frames.
struct PoseError {
  double position = 0.0;
  double orientation = 0.0;
};
PoseError pose_error(const Iso3& a, const Iso3& b);

/// Seeded damped-least-squares IK. Returns the converged solution closest
/// (∞-norm) to the seed among all attempts, or nothing on failure.
std::optional<JointConfig> inverse_kinematics(const KinematicChain& chain, const Pose& target,
                                              const JointConfig& seed,
                                              const IkOptions& opts = {});

struct SphereSpec {
  int link = 0;
  Vec3 offset = Vec3::Zero();
  double radius = 0.0;
};

struct Sphere {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
};

/// Per-link sphere approximation of the robot body.
class SphereModel {
 public:
  SphereModel() = default;
  explicit SphereModel(std::vector<SphereSpec> spheres) : spheres_(std::move(spheres)) {}

  /// One sphere per line: `link_index ox oy oz radius`.
  static SphereModel parse(std::string_view text);
  static SphereModel load(const std::filesystem::path& path);
  std::string serialize() const;

  /// Throws InvalidInput if a radius is non-positive or a link index is out of range.
  void validate(const KinematicChain& chain) const;

  const std::vector<SphereSpec>& spheres() const { return spheres_; }
  std::size_t size() const { return spheres_.size(); }
  double max_radius() const;

 private:
  std::vector<SphereSpec> spheres_;
};

std::vector<Sphere> place_spheres(const KinematicChain& chain, const SphereModel& model,
                                  const JointConfig& q);
std::vector<Sphere> place_spheres(const SphereModel& model, const FkResult& fk);

/// Uniform arc-length placement of `count` spheres on a link-frame segment.
std::vector<SphereSpec> spheres_along_segment(int link, const Vec3& from, const Vec3& to,
                                              int count, double radius);

}  // namespace planfactory
