#include "planfactory/collision.hpp"

#include <cmath>
#include <limits>

#include "planfactory/kernels.hpp"

namespace planfactory {

double sphere_set_sdf(std::span<const Sphere> spheres, const Vec3& p) {
  if (spheres.empty()) throw InvalidInput("sphere_set_sdf needs at least one sphere");
  return kernels::serial::sphere_set_sdf(spheres, p);
}

CollisionWorld::CollisionWorld(PointCloud cloud, std::vector<Cuboid> cuboids, double eps, double cell)
    : cloud_(std::move(cloud)), cuboids_(std::move(cuboids)), eps_(eps), index_(cloud_.points, cell) {
  if (!(eps > 0.0)) throw InvalidInput("collision tolerance must be positive");
  cloud_.validate();
  for (auto l : cloud_.labels)
    if (l != PointLabel::obstacle) throw InvalidInput("collision world cloud must be all obstacle points");
  cuboid_radius_.reserve(cuboids_.size());
  for (const auto& c : cuboids_) cuboid_radius_.push_back(c.half_extents.norm());
}

CollisionWorld CollisionWorld::with_eps(double eps) const {
  return CollisionWorld(cloud_, cuboids_, eps, index_.cell());
}

bool CollisionWorld::cuboid_violation(std::span<const Sphere> spheres) const {
  for (std::size_t i = 0; i < cuboids_.size(); ++i) {
    const auto& box = cuboids_[i];
    const double reach = cuboid_radius_[i] + eps_;
    for (const auto& s : spheres) {
      if ((s.center - box.pose.position).norm() - s.radius >= reach) continue;
      if (box.sdf(s.center) - s.radius < eps_) return true;
    }
  }
  return false;
}

double CollisionWorld::safe_radius(std::span<const Sphere> spheres, std::span<const double> bounds, double cap) const {
  double best = cap;
  for (std::size_t i = 0; i < spheres.size(); ++i) {
    const auto& s = spheres[i];
    const double bound = bounds[i];
    // Clearances beyond `need` cannot lower the result.
    const double need = bound * best;
    double d = need;
    for (std::size_t b = 0; b < cuboids_.size(); ++b) {
      const auto& box = cuboids_[b];
      if ((s.center - box.pose.position).norm() - cuboid_radius_[b] - s.radius - eps_ >= d) continue;
      d = std::min(d, box.sdf(s.center) - s.radius - eps_);
    }
    index_.for_each_near(s.center, s.radius + eps_ + std::max(d, 0.0), [&](std::uint32_t k) {
      d = std::min(d, (cloud_.points[k] - s.center).norm() - s.radius - eps_);
    });
    if (d < 0) return d;
    if (bound > 0 && d < need) best = std::min(best, d / bound);
  }
  return best;
}

std::size_t CollisionWorld::count_cloud_violations(std::span<const Sphere> spheres) const {
  thread_local std::vector<std::uint32_t> stamp;
  thread_local std::uint32_t epoch = 0;
  return kernels::count_violations_indexed(spheres, cloud_.points, index_, eps_, stamp, epoch);
}

bool CollisionWorld::any_cloud_violation(std::span<const Sphere> spheres) const {
  return kernels::any_violation_indexed(spheres, cloud_.points, index_, eps_);
}

std::vector<Sphere> InHandObject::covering() const {
  std::vector<Sphere> out;
  const Vec3 h = 0.5 * dims;
  switch (primitive) {
    case InHandPrimitive::sphere:
      out.push_back({Vec3::Zero(), h.maxCoeff()});
      return out;
    case InHandPrimitive::cylinder: {
      const double radius = std::max(h.x(), h.y());
      const int slices = std::clamp(static_cast<int>(std::ceil(dims.z() / radius)), 1, 32);
      const double half_slice = 0.5 * dims.z() / slices;
      const double r = std::sqrt(radius * radius + half_slice * half_slice);
      for (int i = 0; i < slices; ++i)
        out.push_back({Vec3(0, 0, -h.z() + (2 * i + 1) * half_slice), r});
      return out;
    }
    case InHandPrimitive::box:
    case InHandPrimitive::mesh: {
      // Grid of sub-boxes, each enclosed by its circumscribed sphere; pick
      // the split with the smallest sphere under the 32-sphere cap.
      int best[3] = {1, 1, 1};
      double best_r = std::numeric_limits<double>::infinity();
      for (int nx = 1; nx <= 32; ++nx)
        for (int ny = 1; nx * ny <= 32; ++ny)
          for (int nz = 1; nx * ny * nz <= 32; ++nz) {
            double r = Vec3(h.x() / nx, h.y() / ny, h.z() / nz).norm();
            if (r < best_r - 1e-15) {
              best_r = r;
              best[0] = nx;
              best[1] = ny;
              best[2] = nz;
            }
          }
      for (int i = 0; i < best[0]; ++i)
        for (int j = 0; j < best[1]; ++j)
          for (int k = 0; k < best[2]; ++k)
            out.push_back({Vec3(-h.x() + (2 * i + 1) * h.x() / best[0], -h.y() + (2 * j + 1) * h.y() / best[1],
                                -h.z() + (2 * k + 1) * h.z() / best[2]),
                           best_r});
      return out;
    }
  }
  return out;
}

PointCloud InHandObject::sample_surface(std::size_t n, Rng& rng) const {
  const Vec3 h = 0.5 * dims;
  switch (primitive) {
    case InHandPrimitive::box: {
      Cuboid c;
      c.half_extents = h;
      return planfactory::sample_surface(c, n, rng, PointLabel::in_hand);
    }
    case InHandPrimitive::cylinder: {
      const double r = h.x();
      const double side = 2.0 * M_PI * r * dims.z();
      const double cap = M_PI * r * r;
      PointCloud out;
      for (std::size_t i = 0; i < n; ++i) {
        double pick = uniform(rng, 0.0, side + 2.0 * cap);
        double a = uniform(rng, 0.0, 2.0 * M_PI);
        if (pick < side) {
          out.push_back(Vec3(r * std::cos(a), r * std::sin(a), uniform(rng, -h.z(), h.z())), PointLabel::in_hand);
        } else {
          double rho = r * std::sqrt(uniform(rng, 0.0, 1.0));
          out.push_back(Vec3(rho * std::cos(a), rho * std::sin(a), pick < side + cap ? -h.z() : h.z()),
                        PointLabel::in_hand);
        }
      }
      return out;
    }
    case InHandPrimitive::sphere: {
      PointCloud out;
      std::normal_distribution<double> g;
      for (std::size_t i = 0; i < n; ++i) {
        Vec3 d(g(rng), g(rng), g(rng));
        out.push_back(h.x() * d.normalized(), PointLabel::in_hand);
      }
      return out;
    }
    case InHandPrimitive::mesh:
      if (!mesh) throw InvalidInput("mesh in-hand object without geometry");
      return planfactory::sample_surface(*mesh, n, rng, PointLabel::in_hand);
  }
  return {};
}

double InHandObject::exact_sdf(const Vec3& p) const {
  const Vec3 h = 0.5 * dims;
  switch (primitive) {
    case InHandPrimitive::sphere:
      return p.norm() - h.x();
    case InHandPrimitive::cylinder: {
      double radial = std::hypot(p.x(), p.y()) - h.x();
      double axial = std::abs(p.z()) - h.z();
      return std::min(std::max(radial, axial), 0.0) + Eigen::Vector2d(std::max(radial, 0.0), std::max(axial, 0.0)).norm();
    }
    case InHandPrimitive::box: {
      Cuboid c;
      c.half_extents = h;
      return c.sdf(p);
    }
    case InHandPrimitive::mesh: {
      if (!mesh) throw InvalidInput("mesh in-hand object without geometry");
      // Convex proxy centred on the origin: inside iff behind every face plane.
      double d = std::numeric_limits<double>::infinity();
      bool inside = true;
      for (const auto& f : mesh->faces) {
        Vec3 a = mesh->vertex(static_cast<std::size_t>(f[0]));
        Vec3 b = mesh->vertex(static_cast<std::size_t>(f[1]));
        Vec3 c = mesh->vertex(static_cast<std::size_t>(f[2]));
        d = std::min(d, point_triangle_distance(p, a, b, c));
        Vec3 n = (b - a).cross(c - a);
        if (n.dot(a) < 0) n = -n;
        if (n.dot(p - a) > 0) inside = false;
      }
      return inside ? -d : d;
    }
  }
  return 0.0;
}

InHandObject make_in_hand_object(InHandPrimitive primitive, const Vec3& dims) {
  InHandObject obj;
  obj.primitive = primitive;
  obj.dims = dims;
  if (primitive == InHandPrimitive::sphere) obj.dims = Vec3::Constant(dims.x());
  if (primitive == InHandPrimitive::cylinder) obj.dims.y() = dims.x();
  if (primitive == InHandPrimitive::mesh) {
    // Convex proxy: an icosphere squashed to the sampled extents.
    TriMesh m = make_icosphere(0.5, 1);
    for (auto& v : m.vertices) v = v.cwiseProduct(obj.dims);
    obj.mesh = std::move(m);
  }
  return obj;
}

InHandObject sample_in_hand_object(const InHandConfig& cfg, Rng& rng) {
  const auto primitive = static_cast<InHandPrimitive>(uniform_int(rng, 0, 3));
  Vec3 dims;
  for (int i = 0; i < 3; ++i) dims[i] = uniform(rng, cfg.size_lo[i], cfg.size_hi[i]);
  return make_in_hand_object(primitive, dims);
}

InHandObject attach_in_hand(InHandObject obj, const InHandConfig& cfg, Rng& rng) {
  for (int i = 0; i < 3; ++i) obj.grasp.position[i] = uniform(rng, cfg.offset_lo[i], cfg.offset_hi[i]);
  obj.grasp.orientation = Quat(Eigen::AngleAxisd(uniform(rng, 0.0, 2.0 * M_PI), Vec3::UnitZ()));
  return obj;
}

RobotBody::RobotBody(const KinematicChain& chain, const SphereModel& model, std::optional<InHandObject> in_hand)
    : chain_(&chain), model_(&model), in_hand_(std::move(in_hand)) {
  model.validate(chain);
  if (in_hand_) {
    const Iso3 grasp = in_hand_->grasp.isometry();
    for (const auto& s : in_hand_->covering()) in_hand_local_.push_back({grasp * s.center, s.radius});
  }
  // Joint j turns about an axis through the origin of link frame j, so a
  // point on link l moves at most (distance to that origin) per radian of
  // joint j. The distance is bounded by the offsets along the chain.
  const auto& joints = chain.joints();
  auto bound = [&](int link, double tail) {
    double total = 0.0, reach = tail;
    for (int j = link; j >= 1; --j) {
      total += reach;
      reach += joints[static_cast<std::size_t>(j - 1)].offset.norm();
    }
    return total;
  };
  for (const auto& s : model.spheres()) motion_bounds_.push_back(bound(s.link, s.offset.norm()));
  const int last = static_cast<int>(chain.dof());
  for (const auto& s : in_hand_local_)
    motion_bounds_.push_back(bound(last, chain.ee_offset().position.norm() + s.center.norm()));
}

RobotBody RobotBody::with_in_hand(std::optional<InHandObject> obj) const {
  return RobotBody(*chain_, *model_, std::move(obj));
}

std::vector<Sphere> RobotBody::spheres(const FkResult& fk) const {
  std::vector<Sphere> out = place_spheres(*model_, fk);
  for (const auto& s : in_hand_local_) out.push_back({fk.ee * s.center, s.radius});
  return out;
}

std::vector<Sphere> RobotBody::spheres(const JointConfig& q) const {
  return spheres(forward_kinematics(*chain_, q));
}

CollisionResult config_collision(const CollisionWorld& world, const RobotBody& body, const JointConfig& q) {
  auto spheres = body.spheres(q);
  CollisionResult r;
  r.violating_points = world.count_cloud_violations(spheres);
  r.colliding = r.violating_points > 0 || world.cuboid_violation(spheres);
  return r;
}

bool in_collision(const CollisionWorld& world, const RobotBody& body, const JointConfig& q) {
  auto spheres = body.spheres(q);
  return world.cuboid_violation(spheres) || world.any_cloud_violation(spheres);
}

SegmentResult segment_robot(const PointCloud& cloud, const RobotBody& body, const JointConfig& q, double eps) {
  cloud.validate();
  auto spheres = body.spheres(q);
  auto sdf = kernels::parallel::sdf_batch(spheres, cloud.points);
  SegmentResult out;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (sdf[i] < eps) ++out.removed;
    else out.cloud.push_back(cloud.points[i], cloud.labels[i]);
  }
  return out;
}

std::size_t edge_steps(const JointConfig& q1, const JointConfig& q2, double resolution) {
  if (!(resolution > 0.0)) throw InvalidInput("edge resolution must be positive");
  double len = inf_norm(q1, q2);
  auto steps = static_cast<std::size_t>(std::ceil(len / resolution));
  // Guard against ceil landing one short through rounding of len/resolution.
  while (steps > 0 && len / static_cast<double>(steps) > resolution) ++steps;
  return steps;
}

namespace {

// Whether the balls of radius ra around a and rb around b (∞-norm, joint
// space) cover the segment between them, bisecting where they do not.
bool certify_gap(const CollisionWorld& world, const RobotBody& body, const JointConfig& a, const JointConfig& b,
                 double ra, double rb, double length, int depth) {
  if (ra + rb >= length) return true;
  if (depth > 30) return false;
  const JointConfig m = 0.5 * (a + b);
  const double rm = world.safe_radius(body.spheres(m), body.motion_bounds(), 0.5 * length);
  if (rm < 0) return false;
  return certify_gap(world, body, a, m, ra, rm, 0.5 * length, depth + 1) &&
         certify_gap(world, body, m, b, rm, rb, 0.5 * length, depth + 1);
}

}  // namespace

bool edge_collision_free(const CollisionWorld& world, const RobotBody& body, const JointConfig& q1,
                         const JointConfig& q2, double resolution) {
  body.chain().check_config(q1);
  body.chain().check_config(q2);
  const std::size_t steps = edge_steps(q1, q2, resolution);
  if (steps == 0) return !in_collision(world, body, q1);
  // Coarse-to-fine order finds blocked edges early.
  std::size_t stride = 1;
  while (stride < steps) stride *= 2;
  auto at = [&](std::size_t i) {
    if (i == steps) return JointConfig(q2);
    return JointConfig(q1 + (q2 - q1) * (static_cast<double>(i) / static_cast<double>(steps)));
  };
  if (in_collision(world, body, q1) || in_collision(world, body, q2)) return false;
  for (; stride >= 1; stride /= 2) {
    for (std::size_t i = stride; i < steps; i += 2 * stride)
      if (in_collision(world, body, at(i))) return false;
    if (stride == 1) break;
  }
  const double spacing = (q2 - q1).cwiseAbs().maxCoeff() / static_cast<double>(steps);
  JointConfig prev = q1;
  double prev_r = world.safe_radius(body.spheres(q1), body.motion_bounds(), spacing);
  for (std::size_t i = 1; i <= steps; ++i) {
    JointConfig next = at(i);
    const double r = world.safe_radius(body.spheres(next), body.motion_bounds(), spacing);
    if (r < 0 || !certify_gap(world, body, prev, next, prev_r, r, spacing, 0)) return false;
    prev = std::move(next);
    prev_r = r;
  }
  return true;
}

}  // namespace planfactory
