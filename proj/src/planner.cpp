#include "planfactory/planner.hpp"

#include <algorithm>
#include <cmath>

namespace planfactory {

ProblemConfig ProblemConfig::from(const GenConfig& cfg) {
  ProblemConfig p;
  p.tight_ratio = cfg.tight_ratio();
  p.in_hand = cfg.in_hand();
  return p;
}

Pose sample_region_pose(const SamplingRegion& region, Rng& rng, double inset) {
  const Vec3 h = (region.box.half_extents - Vec3::Constant(inset)).cwiseMax(0.0);
  const Vec3 local(uniform(rng, -h.x(), h.x()), uniform(rng, -h.y(), h.y()), uniform(rng, -h.z(), h.z()));
  const Vec3 z = region.approach.normalized();
  const Vec3 u = (std::abs(z.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX()).cross(z).normalized();
  const double roll = uniform(rng, -M_PI, M_PI);
  const Vec3 x = std::cos(roll) * u + std::sin(roll) * z.cross(u);
  Eigen::Matrix3d r;
  r.col(0) = x;
  r.col(1) = z.cross(x);
  r.col(2) = z;
  Pose p;
  p.position = region.box.pose.isometry() * local;
  p.orientation = Quat(r).normalized();
  return p;
}

namespace {

bool ee_inside(const KinematicChain& chain, const JointConfig& q, const Cuboid& box) {
  const Vec3 l = box.to_local(forward_kinematics(chain, q).ee.translation());
  return (l.cwiseAbs().array() <= box.half_extents.array() + 1e-9).all();
}

// Endpoints live on the storage grid so every later sum of deltas is exact.
JointConfig snap_inside(const KinematicChain& chain, const JointConfig& q) {
  JointConfig out = snap(q, kStorageGridBits);
  for (std::size_t i = 0; i < chain.dof(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const auto& j = chain.joints()[i];
    if (out[k] < j.lower) out[k] = std::ldexp(std::ceil(std::ldexp(j.lower, kStorageGridBits)), -kStorageGridBits);
    if (out[k] > j.upper) out[k] = std::ldexp(std::floor(std::ldexp(j.upper, kStorageGridBits)), -kStorageGridBits);
  }
  return out;
}

}  // namespace

EndpointKinds draw_endpoint_kinds(double tight_ratio, Rng& rng) {
  EndpointKinds k;
  k.start_tight = bernoulli(rng, tight_ratio);
  k.goal_tight = bernoulli(rng, tight_ratio);
  return k;
}

std::pair<Vec3, double> reach_bound(const KinematicChain& chain) {
  if (chain.dof() == 0) return {Vec3::Zero(), chain.ee_offset().position.norm()};
  const Vec3 pivot = forward_kinematics(chain, chain.rest()).links[1].translation();
  double reach = chain.ee_offset().position.norm();
  for (std::size_t i = 1; i < chain.dof(); ++i) reach += chain.joints()[i].offset.norm();
  return {pivot, reach};
}

std::vector<const SamplingRegion*> reachable_regions(const Scene& scene, const KinematicChain& chain) {
  const auto [pivot, reach] = reach_bound(chain);
  std::vector<const SamplingRegion*> out;
  for (const auto* r : scene.regions(true))
    if (r->box.sdf(pivot) <= reach) out.push_back(r);
  return out;
}

PlanningProblem sample_problem(const Scene& scene, const CollisionWorld& world, const KinematicChain& chain,
                               const SphereModel& model, const ProblemConfig& cfg, EndpointKinds kinds, Rng& rng) {
  PlanningProblem p;
  if (bernoulli(rng, cfg.in_hand.ratio))
    p.in_hand = attach_in_hand(sample_in_hand_object(cfg.in_hand, rng), cfg.in_hand, rng);
  const RobotBody body(chain, model, p.in_hand);
  const auto regions = reachable_regions(scene, chain);

  auto endpoint = [&](bool tight) -> JointConfig {
    if (tight) {
      if (regions.empty()) throw UnsampleableScene("no tight region within reach");
      for (int a = 0; a < cfg.tight_attempts; ++a) {
        const SamplingRegion& region =
            *regions[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(regions.size()) - 1))];
        auto ik = inverse_kinematics(chain, sample_region_pose(region, rng, cfg.region_inset), chain.rest(), cfg.ik);
        if (!ik || !chain.within_limits(*ik)) continue;
        const JointConfig q = snap_inside(chain, *ik);
        if (ee_inside(chain, q, region.box) && !in_collision(world, body, q)) return q;
      }
      throw UnsampleableScene("no reachable collision-free pose in any tight region");
    }
    for (int i = 0; i < cfg.max_rejections; ++i) {
      const JointConfig q = snap_inside(chain, chain.sample_uniform(rng));
      if (!in_collision(world, body, q)) return q;
    }
    throw UnsampleableScene("no collision-free configuration in " + std::to_string(cfg.max_rejections) + " draws");
  };

  p.start_tight = kinds.start_tight;
  p.goal_tight = kinds.goal_tight;
  p.start = endpoint(p.start_tight);
  p.goal = endpoint(p.goal_tight);
  return p;
}

PlanningProblem sample_problem(const Scene& scene, const CollisionWorld& world, const KinematicChain& chain,
                               const SphereModel& model, const ProblemConfig& cfg, Rng& rng) {
  EndpointKinds kinds = draw_endpoint_kinds(cfg.tight_ratio, rng);
  if (reachable_regions(scene, chain).empty()) kinds = {};
  return sample_problem(scene, world, chain, model, cfg, kinds, rng);
}

double path_cost(const std::vector<JointConfig>& path) {
  double c = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) c += inf_norm(path[i], path[i - 1]);
  return c;
}

void PlannerConfig::validate() const {
  if (budget && budget->count() <= 0) throw InvalidInput("planning budget must be positive");
  if (!(goal_bias >= 0.0 && goal_bias <= 1.0)) throw InvalidInput("goal bias must lie in [0, 1]");
  if (!(step > 0.0)) throw InvalidInput("step size must be positive");
  if (!(resolution > 0.0)) throw InvalidInput("edge resolution must be positive");
  if (max_iterations < 1 || restarts < 0 || shortcut_iterations < 0)
    throw InvalidInput("planner iteration budgets must be non-negative");
}

bool path_collision_free(const std::vector<JointConfig>& path, const CollisionWorld& world, const RobotBody& body,
                         double resolution) {
  if (path.empty()) return false;
  if (path.size() == 1) return !in_collision(world, body, path[0]);
  for (std::size_t i = 1; i < path.size(); ++i)
    if (!edge_collision_free(world, body, path[i - 1], path[i], resolution)) return false;
  return true;
}

namespace {

using Clock = std::chrono::steady_clock;

struct Tree {
  std::vector<JointConfig> q;
  std::vector<int> parent;

  int add(const JointConfig& x, int p) {
    q.push_back(x);
    parent.push_back(p);
    return static_cast<int>(q.size()) - 1;
  }
  int nearest(const JointConfig& x) const {
    int best = 0;
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < q.size(); ++i) {
      double di = inf_norm(q[i], x);
      if (di < d) {
        d = di;
        best = static_cast<int>(i);
      }
    }
    return best;
  }
  std::vector<JointConfig> to_root(int i) const {
    std::vector<JointConfig> out;
    for (; i >= 0; i = parent[static_cast<std::size_t>(i)]) out.push_back(q[static_cast<std::size_t>(i)]);
    return out;
  }
};

enum class Extend { trapped, advanced, reached };

class BiRrt {
 public:
  BiRrt(const PlanningProblem& prob, const CollisionWorld& world, const RobotBody& body, const PlannerConfig& cfg,
        std::optional<Clock::time_point> deadline)
      : prob_(prob), world_(world), body_(body), cfg_(cfg), deadline_(deadline) {}

  std::optional<std::vector<JointConfig>> run(Rng& rng, int& iterations, int& nodes) {
    Tree s, g;
    s.add(prob_.start, -1);
    g.add(prob_.goal, -1);
    Tree* a = &s;
    Tree* b = &g;
    std::optional<std::vector<JointConfig>> found;
    for (int it = 0; it < cfg_.max_iterations; ++it) {
      if (it % 32 == 0 && expired()) break;
      ++iterations;
      const JointConfig target = bernoulli(rng, cfg_.goal_bias) ? b->q[0] : body_.chain().sample_uniform(rng);
      auto [res, ia] = extend(*a, target);
      if (res != Extend::trapped) {
        const JointConfig bridge = a->q[static_cast<std::size_t>(ia)];
        auto [res_b, ib] = connect(*b, bridge);
        if (res_b == Extend::reached) {
          auto from_s = (a == &s ? *a : *b).to_root(a == &s ? ia : ib);
          auto from_g = (a == &s ? *b : *a).to_root(a == &s ? ib : ia);
          std::reverse(from_s.begin(), from_s.end());
          from_s.insert(from_s.end(), from_g.begin() + 1, from_g.end());
          found = std::move(from_s);
          break;
        }
      }
      std::swap(a, b);
    }
    nodes += static_cast<int>(s.q.size() + g.q.size());
    if (!found) closest_ = s.to_root(s.nearest(prob_.goal));
    return found;
  }

  /// Start-tree branch ending nearest the goal, after a failed run.
  std::vector<JointConfig> closest() const {
    auto p = closest_;
    std::reverse(p.begin(), p.end());
    return p;
  }

  bool expired() const { return deadline_ && Clock::now() >= *deadline_; }

 private:
  std::pair<Extend, int> extend(Tree& t, const JointConfig& target) {
    const int near = t.nearest(target);
    const JointConfig& from = t.q[static_cast<std::size_t>(near)];
    const double d = inf_norm(from, target);
    const bool reach = d <= cfg_.step;
    JointConfig next = reach ? target : JointConfig(from + (target - from) * (cfg_.step / d));
    if (!edge_collision_free(world_, body_, from, next, cfg_.resolution)) return {Extend::trapped, near};
    return {reach ? Extend::reached : Extend::advanced, t.add(next, near)};
  }

  std::pair<Extend, int> connect(Tree& t, const JointConfig& target) {
    for (;;) {
      auto r = extend(t, target);
      if (r.first != Extend::advanced) return r;
    }
  }

  const PlanningProblem& prob_;
  const CollisionWorld& world_;
  const RobotBody& body_;
  const PlannerConfig& cfg_;
  std::optional<Clock::time_point> deadline_;
  std::vector<JointConfig> closest_;
};

void shortcut(std::vector<JointConfig>& path, const CollisionWorld& world, const RobotBody& body,
              const PlannerConfig& cfg, Rng& rng) {
  for (int k = 0; k < cfg.shortcut_iterations && path.size() > 2; ++k) {
    int n = static_cast<int>(path.size());
    int i = uniform_int(rng, 0, n - 3);
    int j = uniform_int(rng, i + 2, n - 1);
    if (edge_collision_free(world, body, path[static_cast<std::size_t>(i)], path[static_cast<std::size_t>(j)],
                            cfg.resolution))
      path.erase(path.begin() + i + 1, path.begin() + j);
  }
}

}  // namespace

PlanResult plan(const PlanningProblem& problem, const CollisionWorld& world, const RobotBody& body,
                const PlannerConfig& cfg) {
  cfg.validate();
  body.chain().check_config(problem.start);
  body.chain().check_config(problem.goal);
  PlanResult out;
  if (in_collision(world, body, problem.start) || in_collision(world, body, problem.goal)) return out;

  std::optional<Clock::time_point> deadline;
  if (cfg.budget) deadline = Clock::now() + *cfg.budget;
  Rng rng(cfg.seed);

  // The straight segment is a lower bound on the ∞-norm cost, so nothing beats it.
  if (edge_collision_free(world, body, problem.start, problem.goal, cfg.resolution)) {
    RawPath p;
    p.waypoints = {problem.start, problem.goal};
    p.cost = path_cost(p.waypoints);
    out.cost_history.push_back(p.cost);
    out.path = std::move(p);
    return out;
  }

  BiRrt search(problem, world, body, cfg, deadline);
  auto first = search.run(rng, out.iterations, out.tree_nodes);
  if (!first) {
    if (cfg.allow_approximate) {
      RawPath p;
      p.waypoints = search.closest();
      shortcut(p.waypoints, world, body, cfg, rng);
      p.cost = path_cost(p.waypoints);
      p.approximate = true;
      out.cost_history.push_back(p.cost);
      out.path = std::move(p);
    }
    return out;
  }

  std::vector<JointConfig> best = std::move(*first);
  out.cost_history.push_back(path_cost(best));
  shortcut(best, world, body, cfg, rng);
  double best_cost = path_cost(best);
  if (best_cost < out.cost_history.back()) out.cost_history.push_back(best_cost);

  for (int r = 0; r < cfg.restarts && !search.expired(); ++r) {
    auto candidate = search.run(rng, out.iterations, out.tree_nodes);
    if (!candidate) continue;
    shortcut(*candidate, world, body, cfg, rng);
    const double c = path_cost(*candidate);
    if (c < best_cost) {
      best = std::move(*candidate);
      best_cost = c;
      out.cost_history.push_back(c);
    }
  }

  if (!path_collision_free(best, world, body, cfg.resolution))
    throw std::logic_error("planner produced a path that fails its own audit");
  RawPath p;
  p.waypoints = std::move(best);
  p.cost = best_cost;
  out.path = std::move(p);
  return out;
}

}  // namespace planfactory
