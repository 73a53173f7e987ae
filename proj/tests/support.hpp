#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "planfactory/collision.hpp"
#include "planfactory/kinematics.hpp"
#include "planfactory/scenegen.hpp"

namespace testing {

inline std::string data_path(const std::string& name) { return std::string(PLANFACTORY_DATA_DIR) + "/" + name; }

inline const planfactory::KinematicChain& panda() {
  static const auto chain = planfactory::KinematicChain::load(data_path("panda.chain"));
  return chain;
}

inline const planfactory::SphereModel& panda_spheres() {
  static const auto model = planfactory::SphereModel::load(data_path("panda.spheres"));
  return model;
}

/// Hand-rolled rotation matrix of a unit quaternion (w, x, y, z).
inline Eigen::Matrix3d quat_matrix(double w, double x, double y, double z) {
  Eigen::Matrix3d r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

/// Rodrigues rotation about a unit axis.
inline Eigen::Matrix3d axis_angle_matrix(const Eigen::Vector3d& k, double a) {
  Eigen::Matrix3d kx;
  kx << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
  return Eigen::Matrix3d::Identity() + std::sin(a) * kx + (1 - std::cos(a)) * kx * kx;
}

inline Eigen::Matrix4d homogeneous(const Eigen::Matrix3d& r, const Eigen::Vector3d& t) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = r;
  m.topRightCorner<3, 1>() = t;
  return m;
}

/// Link frames as 4×4 products, base first, end effector last.
inline std::vector<Eigen::Matrix4d> matrix_fk(const planfactory::KinematicChain& chain,
                                              const Eigen::VectorXd& q) {
  std::vector<Eigen::Matrix4d> out;
  Eigen::Matrix4d t = Eigen::Matrix4d::Identity();
  out.push_back(t);
  for (std::size_t i = 0; i < chain.dof(); ++i) {
    const auto& j = chain.joints()[i];
    auto origin = homogeneous(quat_matrix(j.rotation.w(), j.rotation.x(), j.rotation.y(), j.rotation.z()), j.offset);
    auto joint = homogeneous(axis_angle_matrix(j.axis.normalized(), q[static_cast<Eigen::Index>(i)]), Eigen::Vector3d::Zero());
    t = t * origin * joint;
    out.push_back(t);
  }
  const auto& e = chain.ee_offset();
  out.push_back(t * homogeneous(quat_matrix(e.orientation.w(), e.orientation.x(), e.orientation.y(), e.orientation.z()),
                                e.position));
  return out;
}

/// Signed distance to an oriented box, written out by hand.
inline double box_sdf(const planfactory::Cuboid& c, const Eigen::Vector3d& p) {
  const auto& q = c.pose.orientation;
  Eigen::Matrix3d r = quat_matrix(q.w(), q.x(), q.y(), q.z());
  Eigen::Vector3d d = (r.transpose() * (p - c.pose.position)).cwiseAbs() - c.half_extents;
  return d.cwiseMax(0.0).norm() + std::min(d.maxCoeff(), 0.0);
}

/// Clearance between two boxes (negative or zero when they overlap). The
/// closest pair of two convex polytopes always has a point on an edge of one
/// of them, and the box SDF is convex along a segment, so a golden-section
/// search per edge finds it.
inline double box_clearance(const planfactory::Cuboid& a, const planfactory::Cuboid& b) {
  auto along_edges = [](const planfactory::Cuboid& from, const planfactory::Cuboid& to) {
    const auto corners = from.corners();
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 8; ++i)
      for (int j = i + 1; j < 8; ++j) {
        if (__builtin_popcount(static_cast<unsigned>(i ^ j)) != 1) continue;
        const Eigen::Vector3d p = corners[static_cast<std::size_t>(i)], q = corners[static_cast<std::size_t>(j)];
        auto f = [&](double t) { return box_sdf(to, p + t * (q - p)); };
        const double g = (std::sqrt(5.0) - 1) / 2;
        double lo = 0, hi = 1;
        for (int it = 0; it < 80; ++it) {
          double m1 = hi - g * (hi - lo), m2 = lo + g * (hi - lo);
          if (f(m1) < f(m2)) hi = m2; else lo = m1;
        }
        best = std::min({best, f(0), f(1), f(0.5 * (lo + hi))});
      }
    return best;
  };
  return std::min(along_edges(a, b), along_edges(b, a));
}

}  // namespace testing

namespace testing {

/// Collision test written apart from the library: 4×4 FK, every sphere
/// against every point and box.
inline bool oracle_in_collision(const planfactory::CollisionWorld& world, const planfactory::RobotBody& body,
                                const Eigen::VectorXd& q) {
  const auto frames = matrix_fk(body.chain(), q);
  std::vector<std::pair<Eigen::Vector3d, double>> spheres;
  for (const auto& s : body.model().spheres())
    spheres.emplace_back((frames[static_cast<std::size_t>(s.link)] * s.offset.homogeneous()).head<3>(), s.radius);
  if (const auto& obj = body.in_hand()) {
    const auto& g = obj->grasp;
    const Eigen::Matrix4d grasp = homogeneous(
        quat_matrix(g.orientation.w(), g.orientation.x(), g.orientation.y(), g.orientation.z()), g.position);
    for (const auto& s : obj->covering())
      spheres.emplace_back((frames.back() * grasp * s.center.homogeneous()).head<3>(), s.radius);
  }
  const double eps = world.eps();
  for (const auto& [c, r] : spheres) {
    for (const auto& p : world.cloud().points)
      if ((p - c).norm() - r < eps) return true;
    for (const auto& box : world.cuboids())
      if (box_sdf(box, c) - r < eps) return true;
  }
  return false;
}

/// Every configuration on every edge at ∞-norm spacing ≤ resolution.
inline bool oracle_path_free(const std::vector<Eigen::VectorXd>& path, const planfactory::CollisionWorld& world,
                             const planfactory::RobotBody& body, double resolution = 0.01) {
  if (path.empty()) return false;
  for (const auto& q : path)
    if (oracle_in_collision(world, body, q)) return false;
  for (std::size_t i = 1; i < path.size(); ++i) {
    const Eigen::VectorXd d = path[i] - path[i - 1];
    const int n = static_cast<int>(std::ceil(d.cwiseAbs().maxCoeff() / resolution)) + 1;
    for (int k = 1; k < n; ++k)
      if (oracle_in_collision(world, body, path[i - 1] + d * (static_cast<double>(k) / n))) return false;
  }
  return true;
}

/// Placed items of a scene as cuboid lists: optional keep-out box, base
/// table, each asset, each clutter bounding box.
inline std::vector<std::vector<planfactory::Cuboid>> scene_items(const planfactory::Scene& s, bool with_keep_out) {
  std::vector<std::vector<planfactory::Cuboid>> items;
  if (with_keep_out) items.push_back({s.keep_out});
  items.push_back(s.table.cuboids);
  for (const auto& a : s.assets) items.push_back(a.cuboids);
  for (const auto& c : s.clutter) items.push_back({c.bounding_box()});
  return items;
}

}  // namespace testing
