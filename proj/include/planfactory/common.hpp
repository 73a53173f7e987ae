#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace planfactory {

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;
using Iso3 = Eigen::Isometry3d;

/// Joint-space robot state, one angle (radians) per joint.
using JointConfig = Eigen::VectorXd;

/// Every stochastic routine takes one of these by reference. The engine is
/// fully specified by the standard, so a seed reproduces the same stream on
/// every platform; distributions are libstdc++'s.
using Rng = std::mt19937_64;

/// Thrown when an operation's input violates its documented precondition.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown for unreadable or malformed files.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Pose {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();

  Iso3 isometry() const {
    Iso3 t = Iso3::Identity();
    t.linear() = orientation.toRotationMatrix();
    t.translation() = position;
    return t;
  }
  static Pose from_isometry(const Iso3& t) {
    Pose p;
    p.position = t.translation();
    p.orientation = Quat(t.linear());
    p.orientation.normalize();
    return p;
  }
};

/// Axis-aligned box, used for workspace crops and sampling bounds.
struct WorkspaceBox {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  bool valid() const { return (min.array() < max.array()).all(); }
  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
};

/// Derives an independent stream seed from (base, index) with splitmix64.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline bool bernoulli(Rng& rng, double p) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

/// ∞-norm of a joint-space difference.
inline double inf_norm(const JointConfig& a, const JointConfig& b) {
  return (a - b).lpNorm<Eigen::Infinity>();
}

/// Dyadic joint-value grids. Values of magnitude below 8 on the fine grid add
/// and subtract exactly in double; the storage grid does the same in float.
inline constexpr int kFineGridBits = 32;
inline constexpr int kStorageGridBits = 20;

inline double snap(double x, int bits) { return std::ldexp(std::nearbyint(std::ldexp(x, bits)), -bits); }

inline JointConfig snap(const JointConfig& q, int bits) {
  JointConfig out(q.size());
  for (Eigen::Index i = 0; i < q.size(); ++i) out[i] = snap(q[i], bits);
  return out;
}

inline bool on_grid(const JointConfig& q, int bits) { return snap(q, bits) == q; }

}  // namespace planfactory
