#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include "planfactory/planner.hpp"

namespace planfactory {

/// Per-joint bounds on |velocity| (rad/s) and |acceleration| (rad/s²).
struct Limits {
  JointConfig max_velocity;
  JointConfig max_acceleration;

  void validate(std::size_t dof) const;
  static Limits uniform(std::size_t dof, double velocity, double acceleration);
  /// Manufacturer limits of the default arm.
  static Limits panda();
};

/// Fixed-length joint trajectory. Step i takes one unit of time.
struct Trajectory {
  std::vector<JointConfig> waypoints;
  /// deltas[i] == waypoints[i + 1] - waypoints[i].
  std::vector<JointConfig> deltas;

  static Trajectory from_waypoints(std::vector<JointConfig> waypoints);
  std::size_t size() const { return waypoints.size(); }
  double cost() const { return path_cost(waypoints); }
  /// Largest ∞-norm step.
  double max_step() const;
  /// Finite differences (unit timestep) against the limits.
  bool within_limits(const Limits& limits) const;
  /// waypoints[0] plus the running sum of deltas, in order.
  std::vector<JointConfig> replay() const;

  /// One waypoint per line, joint values separated by spaces.
  std::string to_text() const;
  static Trajectory parse(std::string_view text);
};

/// Clamped cubic spline (zero end velocity) through waypoints, parameterized
/// by cumulative ∞-norm chord length. Repeated waypoints are merged.
class JointSpline {
 public:
  explicit JointSpline(const std::vector<JointConfig>& waypoints);

  double length_param() const { return knots_.back(); }
  const std::vector<double>& knots() const { return knots_; }
  JointConfig at(double t) const;
  JointConfig velocity(double t) const;
  /// ∞-norm arc length from 0 to t, integrated exactly piece by piece.
  double arc_length(double t) const;
  double arc_length() const { return arc_.back(); }
  /// Parameter where the arc length reaches s.
  double param_at_arc(double s) const;

 private:
  struct Piece {
    double t0, t1;
    int joint;
    double sign;
    double s0;  // arc length at t0
  };
  std::size_t segment(double t) const;
  double joint_velocity(std::size_t seg, Eigen::Index j, double t) const;
  double joint_position(std::size_t seg, Eigen::Index j, double t) const;
  double piece_arc(const Piece& p, double t) const;

  std::vector<double> knots_;
  std::vector<JointConfig> values_;
  std::vector<JointConfig> moments_;  // second derivatives at knots
  std::vector<Piece> pieces_;
  std::vector<double> arc_;           // arc length at each knot
};

struct ShortcutOptions {
  int iterations = 200;
  double resolution = 0.01;
  std::optional<std::chrono::milliseconds> budget;
  /// Extra clearance (m) a new shortcut edge must keep beyond the world's
  /// tolerance. The input path is only held to the tolerance itself.
  double margin = 0.0;
};

/// Replaces random stretches of the path with zero-end-velocity cubic
/// segments when those are collision-free and cheaper. Such a segment is
/// geometrically the straight chord; the limits fix its duration only.
RawPath shortcut_spline(const RawPath& path, const Limits& limits, const CollisionWorld& world, const RobotBody& body,
                        Rng& rng, const ShortcutOptions& opts = {});

/// Time a zero-end-velocity cubic needs to cover `delta` within the limits.
double cubic_segment_duration(const JointConfig& delta, const Limits& limits);

enum class Interpolation { spline, linear };

/// Thrown when n waypoints cannot keep the spacing cap.
class PathTooLong : public InvalidInput {
 public:
  PathTooLong(double length, double spacing, std::size_t required_n);
  double length;
  std::size_t required_n;
};

/// Resamples to exactly n waypoints, uniform in ∞-norm arc length along the
/// spline (or the polyline). Endpoints are copied; interior waypoints sit on
/// the fine grid, so replay() is exact whenever the endpoints are on it too.
Trajectory resample_fixed(const std::vector<JointConfig>& path, std::size_t n = 50, double max_spacing = 0.1,
                          Interpolation mode = Interpolation::spline);

struct SmoothOptions {
  std::size_t n = 50;
  double max_spacing = 0.1;
  /// The margin leaves room for the corner cuts of the resampled trajectory.
  ShortcutOptions shortcut{200, 0.01, std::nullopt, 0.01};
  double resolution = 0.01;
  /// Shortcut passes tried before giving up; later ones use fewer iterations.
  int attempts = 3;
};

struct SmoothResult {
  Trajectory trajectory;
  RawPath shortcut;
  Interpolation mode = Interpolation::spline;
};

/// Shortcut, then resample along the spline. Falls back to the polyline when
/// the spline version costs more than the raw path or collides, and to a
/// gentler shortcut pass when both collide. Returns nothing when every
/// attempt collides; throws PathTooLong as resample.
std::optional<SmoothResult> smooth_path(const RawPath& raw, const Limits& limits, const CollisionWorld& world,
                                        const RobotBody& body, Rng& rng, const SmoothOptions& opts = {});

}  // namespace planfactory
