#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "planfactory/kernels.hpp"
#include "planfactory/smooth.hpp"

namespace planfactory {

/// Open-loop prediction under a static world and perfect tracking:
/// q_{t+1} = q_t + Δq_t. Returns deltas.size() + 1 waypoints.
Trajectory predict_rollout(const JointConfig& q0, const std::vector<JointConfig>& deltas);

/// Obstacle points the candidates are scored against, with their index.
class ScoringScene {
 public:
  static constexpr std::size_t kMaxPoints = 4096;

  /// Every point must be labelled obstacle; at most kMaxPoints of them.
  explicit ScoringScene(PointCloud obstacles, double eps = 0.01);

  const std::vector<Vec3>& points() const { return cloud_.points; }
  const SpatialHash& index() const { return index_; }
  double eps() const { return eps_; }

 private:
  PointCloud cloud_;
  double eps_;
  SpatialHash index_;
};

/// Obstacle-labelled points of a cloud.
PointCloud obstacle_points(const PointCloud& cloud);

/// Σ_t Σ_k 1{SDF_{q_t}(p_k) < eps}, robot SDF over the body's spheres
/// (held object included).
std::uint64_t score(const Trajectory& traj, const RobotBody& body, const ScoringScene& scene);

struct Selection {
  std::size_t index = 0;
  std::uint64_t score = 0;
  std::vector<std::uint64_t> scores;
};

/// Argmin of score; ties go to the lowest index. Candidates are scored in
/// parallel. Throws InvalidInput for an empty set or mixed dof.
Selection select_best(std::span<const Trajectory> candidates, const RobotBody& body, const ScoringScene& scene);

/// Same result from plain nested loops on one thread.
Selection select_best_serial(std::span<const Trajectory> candidates, const RobotBody& body,
                             const ScoringScene& scene);

/// Candidate file: trajectories in Trajectory::to_text form separated by
/// blank lines.
std::vector<Trajectory> parse_candidates(std::string_view text);
std::string candidates_to_text(std::span<const Trajectory> candidates);

}  // namespace planfactory
