#include "planfactory/selector.hpp"

#include <sstream>

namespace planfactory {

namespace {

void check_candidates(std::span<const Trajectory> candidates, const RobotBody& body) {
  if (candidates.empty()) throw InvalidInput("select_best needs at least one candidate");
  for (const auto& c : candidates) {
    if (c.waypoints.empty()) throw InvalidInput("candidate trajectory is empty");
    for (const auto& q : c.waypoints) body.chain().check_config(q);
  }
}

std::vector<kernels::SphereSet> sphere_sets(std::span<const Trajectory> candidates, const RobotBody& body,
                                            std::vector<std::size_t>& owner) {
  std::vector<kernels::SphereSet> sets;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    for (const auto& q : candidates[i].waypoints) {
      sets.push_back(body.spheres(q));
      owner.push_back(i);
    }
  return sets;
}

Selection argmin(std::vector<std::uint64_t> scores) {
  Selection s;
  s.index = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] < scores[s.index]) s.index = i;
  s.score = scores[s.index];
  s.scores = std::move(scores);
  return s;
}

}  // namespace

Trajectory predict_rollout(const JointConfig& q0, const std::vector<JointConfig>& deltas) {
  if (!q0.allFinite()) throw InvalidInput("rollout start must be finite");
  Trajectory t;
  t.waypoints.reserve(deltas.size() + 1);
  t.waypoints.push_back(q0);
  for (const auto& d : deltas) {
    if (d.size() != q0.size() || !d.allFinite()) throw InvalidInput("rollout deltas must be finite and match the dof");
    t.waypoints.push_back(t.waypoints.back() + d);
  }
  t.deltas = deltas;
  return t;
}

ScoringScene::ScoringScene(PointCloud obstacles, double eps) : cloud_(std::move(obstacles)), eps_(eps) {
  cloud_.validate();
  if (cloud_.size() > kMaxPoints)
    throw InvalidInput("scoring scene holds " + std::to_string(cloud_.size()) + " points, more than " +
                       std::to_string(kMaxPoints));
  for (auto l : cloud_.labels)
    if (l != PointLabel::obstacle) throw InvalidInput("scoring scene points must all be labelled obstacle");
  if (!(eps >= 0) || !std::isfinite(eps)) throw InvalidInput("eps must be finite and non-negative");
  if (!cloud_.empty()) index_ = SpatialHash(cloud_.points, 0.05);
}

PointCloud obstacle_points(const PointCloud& cloud) {
  PointCloud out;
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (cloud.labels[i] == PointLabel::obstacle) out.push_back(cloud.points[i], PointLabel::obstacle);
  return out;
}

std::uint64_t score(const Trajectory& traj, const RobotBody& body, const ScoringScene& scene) {
  std::uint64_t total = 0;
  for (const auto& q : traj.waypoints)
    total += kernels::serial::count_violations(body.spheres(q), scene.points(), scene.eps());
  return total;
}

Selection select_best(std::span<const Trajectory> candidates, const RobotBody& body, const ScoringScene& scene) {
  check_candidates(candidates, body);
  std::vector<std::size_t> owner;
  const auto sets = sphere_sets(candidates, body, owner);
  std::vector<std::uint64_t> scores(candidates.size(), 0);
  if (!scene.points().empty()) {
    const auto counts = kernels::parallel::count_violations_sets(sets, scene.points(), scene.index(), scene.eps());
    for (std::size_t k = 0; k < counts.size(); ++k) scores[owner[k]] += counts[k];
  }
  return argmin(std::move(scores));
}

Selection select_best_serial(std::span<const Trajectory> candidates, const RobotBody& body,
                             const ScoringScene& scene) {
  check_candidates(candidates, body);
  std::vector<std::uint64_t> scores;
  for (const auto& c : candidates) scores.push_back(score(c, body, scene));
  return argmin(std::move(scores));
}

std::vector<Trajectory> parse_candidates(std::string_view text) {
  std::vector<Trajectory> out;
  std::string block;
  std::istringstream in{std::string(text)};
  std::string line;
  auto flush = [&] {
    if (!block.empty()) out.push_back(Trajectory::parse(block));
    block.clear();
  };
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      flush();
    } else {
      block += line;
      block += '\n';
    }
  }
  flush();
  return out;
}

std::string candidates_to_text(std::span<const Trajectory> candidates) {
  std::string out;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (i) out += '\n';
    out += candidates[i].to_text();
  }
  return out;
}

}  // namespace planfactory
