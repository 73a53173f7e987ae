#include "planfactory/kinematics.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "planfactory/config.hpp"

namespace planfactory {

namespace {

Quat quat_from_values(const std::vector<double>& v, const std::string& what) {
  if (v.size() != 4) throw InvalidInput(what + ": expected quaternion w x y z");
  Quat q(v[0], v[1], v[2], v[3]);
  if (std::abs(q.norm() - 1.0) > 1e-9) throw InvalidInput(what + ": quaternion is not unit norm");
  q.normalize();
  return q;
}

Vec3 vec_from_values(const std::vector<double>& v, const std::string& what) {
  if (v.size() != 3) throw InvalidInput(what + ": expected 3 values");
  return Vec3(v[0], v[1], v[2]);
}

std::string join(std::initializer_list<double> vals) {
  std::string out;
  for (double v : vals) {
    if (!out.empty()) out += ' ';
    out += format_double(v);
  }
  return out;
}

Iso3 joint_origin(const JointSpec& j) {
  Iso3 t = Iso3::Identity();
  t.linear() = j.rotation.toRotationMatrix();
  t.translation() = j.offset;
  return t;
}

}  // namespace

KinematicChain::KinematicChain(std::vector<JointSpec> joints, Pose ee_offset, JointConfig rest)
    : joints_(std::move(joints)), ee_offset_(std::move(ee_offset)), rest_(std::move(rest)) {
  if (joints_.empty()) throw InvalidInput("chain needs at least one joint");
  for (auto& j : joints_) {
    if (!(j.lower < j.upper)) throw InvalidInput("joint limits must satisfy lower < upper");
    if (j.axis.norm() < 1e-12) throw InvalidInput("joint axis must be non-zero");
    if (std::abs(j.rotation.norm() - 1.0) > 1e-9) throw InvalidInput("joint rotation not unit");
    j.axis.normalize();
    j.rotation.normalize();
  }
  if (std::abs(ee_offset_.orientation.norm() - 1.0) > 1e-9)
    throw InvalidInput("end-effector rotation not unit");
  if (rest_.size() == 0) rest_ = clamp(JointConfig::Zero(static_cast<Eigen::Index>(dof())));
  check_config(rest_);
  if (!within_limits(rest_)) throw InvalidInput("rest configuration outside joint limits");
}

KinematicChain KinematicChain::parse(std::string_view text) {
  auto kv = KeyValueFile::parse(text);
  std::vector<JointSpec> joints;
  for (const auto* s : kv.find_all("joint")) {
    JointSpec j;
    std::string where = "joint " + std::to_string(joints.size() + 1);
    if (auto v = s->get("offset")) j.offset = vec_from_values(parse_numbers(*v), where + " offset");
    if (auto v = s->get("rotation")) j.rotation = quat_from_values(parse_numbers(*v), where + " rotation");
    if (auto v = s->get("axis")) j.axis = vec_from_values(parse_numbers(*v), where + " axis");
    if (auto type = s->get("type"); type && *type != "revolute")
      throw InvalidInput(where + ": only revolute joints are supported");
    auto lim = s->get("limits");
    if (!lim) throw InvalidInput(where + ": missing limits");
    auto lv = parse_numbers(*lim);
    if (lv.size() != 2) throw InvalidInput(where + ": limits needs 2 values");
    j.lower = lv[0];
    j.upper = lv[1];
    joints.push_back(j);
  }
  Pose ee;
  JointConfig rest;
  if (const auto* c = kv.find("chain")) {
    if (auto v = c->get("ee_offset")) ee.position = vec_from_values(parse_numbers(*v), "ee_offset");
    if (auto v = c->get("ee_rotation")) ee.orientation = quat_from_values(parse_numbers(*v), "ee_rotation");
    if (auto v = c->get("rest")) {
      auto r = parse_numbers(*v);
      rest = Eigen::Map<const JointConfig>(r.data(), static_cast<Eigen::Index>(r.size()));
    }
    if (auto v = c->get("dof"); v && parse_numbers(*v) != std::vector<double>{double(joints.size())})
      throw InvalidInput("chain dof does not match number of [joint] sections");
  }
  return KinematicChain(std::move(joints), ee, rest);
}

KinematicChain KinematicChain::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open chain file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string KinematicChain::serialize() const {
  KeyValueFile kv;
  auto& c = kv.add_section("chain");
  c.entries.emplace_back("dof", std::to_string(dof()));
  const auto& p = ee_offset_.position;
  const auto& o = ee_offset_.orientation;
  c.entries.emplace_back("ee_offset", join({p.x(), p.y(), p.z()}));
  c.entries.emplace_back("ee_rotation", join({o.w(), o.x(), o.y(), o.z()}));
  std::string rest;
  for (Eigen::Index i = 0; i < rest_.size(); ++i) rest += (i ? " " : "") + format_double(rest_[i]);
  c.entries.emplace_back("rest", rest);
  for (const auto& j : joints_) {
    auto& s = kv.add_section("joint");
    s.entries.emplace_back("offset", join({j.offset.x(), j.offset.y(), j.offset.z()}));
    s.entries.emplace_back("rotation",
                           join({j.rotation.w(), j.rotation.x(), j.rotation.y(), j.rotation.z()}));
    s.entries.emplace_back("axis", join({j.axis.x(), j.axis.y(), j.axis.z()}));
    s.entries.emplace_back("limits", join({j.lower, j.upper}));
  }
  return kv.dump();
}

std::uint64_t KinematicChain::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : serialize()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

JointConfig KinematicChain::lower() const {
  JointConfig out(static_cast<Eigen::Index>(dof()));
  for (std::size_t i = 0; i < dof(); ++i) out[static_cast<Eigen::Index>(i)] = joints_[i].lower;
  return out;
}

JointConfig KinematicChain::upper() const {
  JointConfig out(static_cast<Eigen::Index>(dof()));
  for (std::size_t i = 0; i < dof(); ++i) out[static_cast<Eigen::Index>(i)] = joints_[i].upper;
  return out;
}

bool KinematicChain::within_limits(const JointConfig& q) const {
  if (static_cast<std::size_t>(q.size()) != dof()) return false;
  for (std::size_t i = 0; i < dof(); ++i) {
    double v = q[static_cast<Eigen::Index>(i)];
    if (!(v >= joints_[i].lower && v <= joints_[i].upper)) return false;
  }
  return true;
}

JointConfig KinematicChain::clamp(const JointConfig& q) const {
  check_config(q);
  JointConfig out = q;
  for (std::size_t i = 0; i < dof(); ++i) {
    auto k = static_cast<Eigen::Index>(i);
    out[k] = std::clamp(out[k], joints_[i].lower, joints_[i].upper);
  }
  return out;
}

JointConfig KinematicChain::sample_uniform(Rng& rng) const {
  JointConfig out(static_cast<Eigen::Index>(dof()));
  for (std::size_t i = 0; i < dof(); ++i)
    out[static_cast<Eigen::Index>(i)] = uniform(rng, joints_[i].lower, joints_[i].upper);
  return out;
}

void KinematicChain::check_config(const JointConfig& q) const {
  if (static_cast<std::size_t>(q.size()) != dof())
    throw InvalidInput("joint config has " + std::to_string(q.size()) + " entries, chain has " +
                       std::to_string(dof()) + " joints");
  if (!q.allFinite()) throw InvalidInput("joint config has non-finite entries");
}

FkResult forward_kinematics(const KinematicChain& chain, const JointConfig& q) {
  chain.check_config(q);
  FkResult out;
  out.links.reserve(chain.dof() + 1);
  Iso3 t = Iso3::Identity();
  out.links.push_back(t);
  const auto& joints = chain.joints();
  for (std::size_t i = 0; i < joints.size(); ++i) {
    const auto& j = joints[i];
    t = t * joint_origin(j) * Eigen::AngleAxisd(q[static_cast<Eigen::Index>(i)], j.axis);
    out.links.push_back(t);
  }
  out.ee = t * chain.ee_offset().isometry();
  return out;
}

Eigen::Matrix<double, 6, Eigen::Dynamic> ee_jacobian(const KinematicChain& chain,
                                                      const FkResult& fk) {
  const auto n = static_cast<Eigen::Index>(chain.dof());
  Eigen::Matrix<double, 6, Eigen::Dynamic> jac(6, n);
  const Vec3 pe = fk.ee.translation();
  for (Eigen::Index i = 0; i < n; ++i) {
    // Joint i rotates link i+1; its axis and origin are those of link i+1's frame.
    const Iso3& frame = fk.links[static_cast<std::size_t>(i + 1)];
    Vec3 z = frame.linear() * chain.joints()[static_cast<std::size_t>(i)].axis;
    jac.block<3, 1>(0, i) = z.cross(pe - frame.translation());
    jac.block<3, 1>(3, i) = z;
  }
  return jac;
}

PoseError pose_error(const Iso3& a, const Iso3& b) {
  PoseError e;
  e.position = (a.translation() - b.translation()).norm();
  Eigen::AngleAxisd aa(Eigen::Matrix3d(a.linear() * b.linear().transpose()));
  e.orientation = std::abs(aa.angle());
  return e;
}

namespace {

using Clock = std::chrono::steady_clock;

/// One DLS descent from `start`. Returns the converged config or nothing.
std::optional<JointConfig> dls_descent(const KinematicChain& chain, const Iso3& target,
                                       JointConfig q, const IkOptions& opts,
                                       std::optional<Clock::time_point> deadline) {
  const double lambda2 = opts.damping * opts.damping;
  Eigen::Matrix<double, 6, 1> err;
  for (int it = 0; it <= opts.max_iterations; ++it) {
    FkResult fk = forward_kinematics(chain, q);
    err.head<3>() = target.translation() - fk.ee.translation();
    Eigen::AngleAxisd aa(Eigen::Matrix3d(target.linear() * fk.ee.linear().transpose()));
    err.tail<3>() = aa.axis() * aa.angle();
    if (err.head<3>().norm() < opts.position_tol && std::abs(aa.angle()) < opts.orientation_tol)
      return q;
    if (it == opts.max_iterations) break;
    if (deadline && Clock::now() > *deadline) break;
    auto jac = ee_jacobian(chain, fk);
    Eigen::Matrix<double, 6, 6> jjt = jac * jac.transpose();
    jjt.diagonal().array() += lambda2;
    JointConfig dq = jac.transpose() * jjt.ldlt().solve(err);
    double step = dq.lpNorm<Eigen::Infinity>();
    if (step > opts.max_step) dq *= opts.max_step / step;
    q = chain.clamp(q + dq);
  }
  return std::nullopt;
}

}  // namespace

std::optional<JointConfig> inverse_kinematics(const KinematicChain& chain, const Pose& target,
                                              const JointConfig& seed, const IkOptions& opts) {
  chain.check_config(seed);
  if (!chain.within_limits(seed)) throw InvalidInput("IK seed outside joint limits");
  std::optional<Clock::time_point> deadline;
  if (opts.timeout) deadline = Clock::now() + *opts.timeout;
  const Iso3 goal = target.isometry();

  if (auto q = dls_descent(chain, goal, seed, opts, deadline)) return q;

  Rng rng(opts.restart_seed);
  std::normal_distribution<double> noise(0.0, opts.restart_sigma);
  std::optional<JointConfig> best;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int attempt = 1; attempt < opts.max_attempts; ++attempt) {
    if (deadline && Clock::now() > *deadline) break;
    JointConfig start = seed;
    for (Eigen::Index i = 0; i < start.size(); ++i) start[i] += noise(rng);
    start = chain.clamp(start);
    if (auto q = dls_descent(chain, goal, start, opts, deadline)) {
      double d = inf_norm(*q, seed);
      if (d < best_dist) {
        best_dist = d;
        best = std::move(q);
      }
    }
  }
  return best;
}

SphereModel SphereModel::parse(std::string_view text) {
  std::vector<SphereSpec> spheres;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    SphereSpec s;
    if (!(ls >> s.link >> s.offset.x() >> s.offset.y() >> s.offset.z() >> s.radius))
      throw IoError("sphere model line " + std::to_string(line_no) +
                    ": expected 'link ox oy oz radius'");
    spheres.push_back(s);
  }
  return SphereModel(std::move(spheres));
}

SphereModel SphereModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open sphere model: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string SphereModel::serialize() const {
  std::string out;
  for (const auto& s : spheres_) {
    out += std::to_string(s.link) + " " + join({s.offset.x(), s.offset.y(), s.offset.z(), s.radius}) +
           "\n";
  }
  return out;
}

void SphereModel::validate(const KinematicChain& chain) const {
  for (const auto& s : spheres_) {
    if (!(s.radius > 0.0)) throw InvalidInput("sphere radius must be positive");
    if (s.link < 0 || static_cast<std::size_t>(s.link) > chain.dof())
      throw InvalidInput("sphere link index " + std::to_string(s.link) + " out of range");
    if (!s.offset.allFinite()) throw InvalidInput("sphere offset not finite");
  }
}

double SphereModel::max_radius() const {
  double r = 0.0;
  for (const auto& s : spheres_) r = std::max(r, s.radius);
  return r;
}

std::vector<Sphere> place_spheres(const SphereModel& model, const FkResult& fk) {
  std::vector<Sphere> out;
  out.reserve(model.size());
  for (const auto& s : model.spheres())
    out.push_back({fk.links.at(static_cast<std::size_t>(s.link)) * s.offset, s.radius});
  return out;
}

std::vector<Sphere> place_spheres(const KinematicChain& chain, const SphereModel& model,
                                  const JointConfig& q) {
  return place_spheres(model, forward_kinematics(chain, q));
}

std::vector<SphereSpec> spheres_along_segment(int link, const Vec3& from, const Vec3& to,
                                              int count, double radius) {
  std::vector<SphereSpec> out;
  for (int i = 0; i < count; ++i) {
    double t = count == 1 ? 0.5 : static_cast<double>(i) / (count - 1);
    out.push_back({link, from + t * (to - from), radius});
  }
  return out;
}

}  // namespace planfactory
