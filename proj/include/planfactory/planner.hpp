#pragma once

#include <chrono>
#include <optional>
#include <vector>

#include "planfactory/collision.hpp"
#include "planfactory/scenegen.hpp"

namespace planfactory {

struct PlanningProblem {
  JointConfig start;
  JointConfig goal;
  std::optional<InHandObject> in_hand;
  bool start_tight = false;
  bool goal_tight = false;
};

struct ProblemConfig {
  double tight_ratio = 0.5;
  InHandConfig in_hand;
  int max_rejections = 1000;
  /// Region/pose draws per tight endpoint before the scene is given up on.
  int tight_attempts = 200;
  /// Tight EE targets keep this far inside the region so the fingers fit.
  double region_inset = 0.04;
  /// Deterministic by default: no wall-clock cutoff. One short descent per
  /// pose; a fresh pose draw does the job of a restart.
  IkOptions ik = [] {
    IkOptions o;
    o.timeout.reset();
    o.max_attempts = 1;
    o.max_iterations = 100;
    return o;
  }();

  static ProblemConfig from(const GenConfig& cfg);
};

/// Raised when a scene offers no valid endpoint within the sampling budget.
class UnsampleableScene : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// End-effector target inside a region: uniform position, gripper axis along
/// the region's approach direction, uniform roll about it.
Pose sample_region_pose(const SamplingRegion& region, Rng& rng, double inset = 0.0);

struct EndpointKinds {
  bool start_tight = false;
  bool goal_tight = false;
};

/// Each endpoint is tight with probability `tight_ratio`.
EndpointKinds draw_endpoint_kinds(double tight_ratio, Rng& rng);

/// Upper bound on how far the end effector gets from the second joint
/// (which the first joint cannot move), and that joint's position.
std::pair<Vec3, double> reach_bound(const KinematicChain& chain);

/// Tight regions with at least one point within reach.
std::vector<const SamplingRegion*> reachable_regions(const Scene& scene, const KinematicChain& chain);

/// Draws the in-hand object (if any), then endpoints of the requested kinds.
/// Both endpoints are collision-free with the object attached. Throws
/// UnsampleableScene when a tight endpoint is requested and no reachable
/// pose is found. A tight endpoint's EE lies inside its region (checked by FK).
/// Endpoints are snapped to the storage grid before they are checked.
PlanningProblem sample_problem(const Scene& scene, const CollisionWorld& world, const KinematicChain& chain,
                               const SphereModel& model, const ProblemConfig& cfg, EndpointKinds kinds, Rng& rng);

/// Same, with kinds drawn from cfg.tight_ratio; a scene without reachable
/// tight regions gets two free endpoints.
PlanningProblem sample_problem(const Scene& scene, const CollisionWorld& world, const KinematicChain& chain,
                               const SphereModel& model, const ProblemConfig& cfg, Rng& rng);

/// Σ ‖q_{i+1} − q_i‖∞.
double path_cost(const std::vector<JointConfig>& path);

struct RawPath {
  std::vector<JointConfig> waypoints;
  double cost = 0.0;
  /// Ends at the reachable configuration closest to the goal instead of the goal.
  bool approximate = false;
};

struct PlannerConfig {
  /// Wall-clock guard over the whole call; unset leaves only the iteration
  /// budgets, which makes plan() a pure function of its inputs.
  std::optional<std::chrono::milliseconds> budget = std::chrono::milliseconds(5000);
  double goal_bias = 0.05;
  double step = 0.1;          // rad, ∞-norm extension length
  double resolution = 0.01;   // rad, edge check spacing
  int max_iterations = 20000; // tree extensions per BiRRT run
  int restarts = 2;           // extra BiRRT runs after the first solution
  int shortcut_iterations = 100;
  bool allow_approximate = false;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PlanResult {
  std::optional<RawPath> path;
  /// Incumbent cost after each improvement, first solution first.
  std::vector<double> cost_history;
  int iterations = 0;
  int tree_nodes = 0;
};

PlanResult plan(const PlanningProblem& problem, const CollisionWorld& world, const RobotBody& body,
                const PlannerConfig& cfg);

/// Dense audit: every edge free at the given resolution.
bool path_collision_free(const std::vector<JointConfig>& path, const CollisionWorld& world, const RobotBody& body,
                         double resolution = 0.01);

}  // namespace planfactory
