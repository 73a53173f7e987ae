#include "planfactory/smooth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace planfactory {

void Limits::validate(std::size_t dof) const {
  const auto n = static_cast<Eigen::Index>(dof);
  if (max_velocity.size() != n || max_acceleration.size() != n)
    throw InvalidInput("limits have " + std::to_string(max_velocity.size()) + " joints, expected " +
                       std::to_string(dof));
  if (!(max_velocity.array() > 0).all() || !(max_acceleration.array() > 0).all())
    throw InvalidInput("velocity and acceleration limits must be positive");
}

Limits Limits::uniform(std::size_t dof, double velocity, double acceleration) {
  const auto n = static_cast<Eigen::Index>(dof);
  return {JointConfig::Constant(n, velocity), JointConfig::Constant(n, acceleration)};
}

Limits Limits::panda() {
  Limits l;
  l.max_velocity.resize(7);
  l.max_velocity << 2.175, 2.175, 2.175, 2.175, 2.61, 2.61, 2.61;
  l.max_acceleration.resize(7);
  l.max_acceleration << 15, 7.5, 10, 12.5, 15, 20, 20;
  return l;
}

Trajectory Trajectory::from_waypoints(std::vector<JointConfig> waypoints) {
  Trajectory t;
  t.waypoints = std::move(waypoints);
  for (std::size_t i = 1; i < t.waypoints.size(); ++i) {
    if (t.waypoints[i].size() != t.waypoints[0].size()) throw InvalidInput("waypoints differ in joint count");
    t.deltas.push_back(t.waypoints[i] - t.waypoints[i - 1]);
  }
  return t;
}

double Trajectory::max_step() const {
  double m = 0.0;
  for (const auto& d : deltas) m = std::max(m, d.lpNorm<Eigen::Infinity>());
  return m;
}

bool Trajectory::within_limits(const Limits& limits) const {
  if (waypoints.empty()) return true;
  limits.validate(static_cast<std::size_t>(waypoints[0].size()));
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if ((deltas[i].cwiseAbs().array() > limits.max_velocity.array()).any()) return false;
    if (i > 0 && ((deltas[i] - deltas[i - 1]).cwiseAbs().array() > limits.max_acceleration.array()).any())
      return false;
  }
  return true;
}

std::vector<JointConfig> Trajectory::replay() const {
  std::vector<JointConfig> out;
  if (waypoints.empty()) return out;
  JointConfig q = waypoints[0];
  out.push_back(q);
  for (const auto& d : deltas) {
    q = q + d;
    out.push_back(q);
  }
  return out;
}

std::string Trajectory::to_text() const {
  std::string out;
  char buf[32];
  for (const auto& q : waypoints) {
    for (Eigen::Index j = 0; j < q.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", q[j]);
      if (j > 0) out += ' ';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

Trajectory Trajectory::parse(std::string_view text) {
  std::vector<JointConfig> wps;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    std::vector<double> v;
    double x;
    while (ls >> x) v.push_back(x);
    if (!ls.eof() || v.empty()) throw IoError("trajectory line " + std::to_string(line_no) + ": expected numbers");
    if (!wps.empty() && v.size() != static_cast<std::size_t>(wps[0].size()))
      throw IoError("trajectory line " + std::to_string(line_no) + ": joint count changes");
    wps.push_back(Eigen::Map<JointConfig>(v.data(), static_cast<Eigen::Index>(v.size())));
  }
  return from_waypoints(std::move(wps));
}

namespace {

// Roots of a x² + b x + c strictly inside (0, h).
void quadratic_roots(double a, double b, double c, double h, std::vector<double>& out) {
  auto keep = [&](double x) {
    if (x > 0 && x < h) out.push_back(x);
  };
  const double scale = std::max({std::abs(a) * h * h, std::abs(b) * h, std::abs(c)});
  if (scale == 0) return;
  if (std::abs(a) * h * h <= 1e-14 * scale) {
    if (b != 0) keep(-c / b);
    return;
  }
  const double disc = b * b - 4 * a * c;
  if (disc < 0) return;
  const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
  if (q != 0) {
    keep(q / a);
    keep(c / q);
  } else {
    keep(0.0);
  }
}

}  // namespace

JointSpline::JointSpline(const std::vector<JointConfig>& waypoints) {
  if (waypoints.empty()) throw InvalidInput("spline needs at least one waypoint");
  values_.push_back(waypoints[0]);
  knots_.push_back(0.0);
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    if (waypoints[i].size() != waypoints[0].size()) throw InvalidInput("waypoints differ in joint count");
    const double d = inf_norm(waypoints[i], values_.back());
    if (d == 0) continue;
    values_.push_back(waypoints[i]);
    knots_.push_back(knots_.back() + d);
  }
  const std::size_t m = values_.size();
  const Eigen::Index dof = values_[0].size();
  moments_.assign(m, JointConfig::Zero(dof));
  arc_.assign(m, 0.0);
  if (m < 2) return;

  // Clamped spline with zero end slopes: tridiagonal system in the second
  // derivatives, solved per joint by the Thomas algorithm.
  std::vector<double> h(m - 1);
  for (std::size_t i = 0; i + 1 < m; ++i) h[i] = knots_[i + 1] - knots_[i];
  for (Eigen::Index j = 0; j < dof; ++j) {
    std::vector<double> lo(m, 0), di(m, 0), up(m, 0), rhs(m, 0);
    auto slope = [&](std::size_t i) { return (values_[i + 1][j] - values_[i][j]) / h[i]; };
    di[0] = 2 * h[0];
    up[0] = h[0];
    rhs[0] = 6 * slope(0);
    for (std::size_t i = 1; i + 1 < m; ++i) {
      lo[i] = h[i - 1];
      di[i] = 2 * (h[i - 1] + h[i]);
      up[i] = h[i];
      rhs[i] = 6 * (slope(i) - slope(i - 1));
    }
    lo[m - 1] = h[m - 2];
    di[m - 1] = 2 * h[m - 2];
    rhs[m - 1] = -6 * slope(m - 2);
    for (std::size_t i = 1; i < m; ++i) {
      const double w = lo[i] / di[i - 1];
      di[i] -= w * up[i - 1];
      rhs[i] -= w * rhs[i - 1];
    }
    moments_[m - 1][j] = rhs[m - 1] / di[m - 1];
    for (std::size_t i = m - 1; i-- > 0;) moments_[i][j] = (rhs[i] - up[i] * moments_[i + 1][j]) / di[i];
  }

  // Split every segment where the fastest joint changes or a velocity
  // changes sign; on each piece the ∞-norm speed is one signed quadratic.
  for (std::size_t seg = 0; seg + 1 < m; ++seg) {
    const double hs = h[seg];
    std::vector<double> coef_a(static_cast<std::size_t>(dof)), coef_b(coef_a.size()), coef_c(coef_a.size());
    for (Eigen::Index j = 0; j < dof; ++j) {
      const double m0 = moments_[seg][j], m1 = moments_[seg + 1][j];
      const auto k = static_cast<std::size_t>(j);
      coef_a[k] = (m1 - m0) / (2 * hs);
      coef_b[k] = m0;
      coef_c[k] = -m0 * hs / 2 + (values_[seg + 1][j] - values_[seg][j]) / hs - (m1 - m0) * hs / 6;
    }
    std::vector<double> cuts{0.0, hs};
    for (std::size_t a = 0; a < coef_a.size(); ++a) {
      quadratic_roots(coef_a[a], coef_b[a], coef_c[a], hs, cuts);
      for (std::size_t b = a + 1; b < coef_a.size(); ++b) {
        quadratic_roots(coef_a[a] - coef_a[b], coef_b[a] - coef_b[b], coef_c[a] - coef_c[b], hs, cuts);
        quadratic_roots(coef_a[a] + coef_a[b], coef_b[a] + coef_b[b], coef_c[a] + coef_c[b], hs, cuts);
      }
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    double s = arc_[seg];
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      const double x = 0.5 * (cuts[c] + cuts[c + 1]);
      std::size_t best = 0;
      double best_v = -1;
      for (std::size_t j = 0; j < coef_a.size(); ++j) {
        const double v = std::abs((coef_a[j] * x + coef_b[j]) * x + coef_c[j]);
        if (v > best_v) {
          best_v = v;
          best = j;
        }
      }
      const double vx = (coef_a[best] * x + coef_b[best]) * x + coef_c[best];
      Piece p{knots_[seg] + cuts[c], knots_[seg] + cuts[c + 1], static_cast<int>(best), vx < 0 ? -1.0 : 1.0, s};
      if (c + 2 == cuts.size()) p.t1 = knots_[seg + 1];
      s += std::max(0.0, piece_arc(p, p.t1));
      pieces_.push_back(p);
    }
    arc_[seg + 1] = s;
  }
}

std::size_t JointSpline::segment(double t) const {
  if (knots_.size() < 2) return 0;
  auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
  auto i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, it - knots_.begin() - 1));
  return std::min(i, knots_.size() - 2);
}

double JointSpline::joint_position(std::size_t seg, Eigen::Index j, double t) const {
  const double t0 = knots_[seg], t1 = knots_[seg + 1], h = t1 - t0;
  const double m0 = moments_[seg][j], m1 = moments_[seg + 1][j];
  const double y0 = values_[seg][j], y1 = values_[seg + 1][j];
  const double a = t1 - t, b = t - t0;
  return m0 * a * a * a / (6 * h) + m1 * b * b * b / (6 * h) + (y0 / h - m0 * h / 6) * a + (y1 / h - m1 * h / 6) * b;
}

double JointSpline::joint_velocity(std::size_t seg, Eigen::Index j, double t) const {
  const double t0 = knots_[seg], t1 = knots_[seg + 1], h = t1 - t0;
  const double m0 = moments_[seg][j], m1 = moments_[seg + 1][j];
  const double a = t1 - t, b = t - t0;
  return -m0 * a * a / (2 * h) + m1 * b * b / (2 * h) + (values_[seg + 1][j] - values_[seg][j]) / h -
         (m1 - m0) * h / 6;
}

double JointSpline::piece_arc(const Piece& p, double t) const {
  const std::size_t seg = segment(0.5 * (p.t0 + p.t1));
  return p.sign * (joint_position(seg, p.joint, t) - joint_position(seg, p.joint, p.t0));
}

JointConfig JointSpline::at(double t) const {
  if (knots_.size() < 2) return values_[0];
  if (t <= 0) return values_.front();
  if (t >= knots_.back()) return values_.back();
  const std::size_t seg = segment(t);
  JointConfig q(values_[0].size());
  for (Eigen::Index j = 0; j < q.size(); ++j) q[j] = joint_position(seg, j, t);
  return q;
}

JointConfig JointSpline::velocity(double t) const {
  if (knots_.size() < 2) return JointConfig::Zero(values_[0].size());
  t = std::clamp(t, 0.0, knots_.back());
  const std::size_t seg = segment(t);
  JointConfig v(values_[0].size());
  for (Eigen::Index j = 0; j < v.size(); ++j) v[j] = joint_velocity(seg, j, t);
  return v;
}

double JointSpline::arc_length(double t) const {
  if (pieces_.empty() || t <= 0) return 0.0;
  if (t >= knots_.back()) return arc_.back();
  auto it = std::upper_bound(pieces_.begin(), pieces_.end(), t, [](double x, const Piece& p) { return x < p.t0; });
  const Piece& p = *(it - 1);
  return p.s0 + std::max(0.0, piece_arc(p, t));
}

double JointSpline::param_at_arc(double s) const {
  if (pieces_.empty() || s <= 0) return 0.0;
  if (s >= arc_.back()) return knots_.back();
  auto it = std::upper_bound(pieces_.begin(), pieces_.end(), s, [](double x, const Piece& p) { return x < p.s0; });
  const Piece& p = *(it - 1);
  double lo = p.t0, hi = p.t1;
  for (int k = 0; k < 200 && hi - lo > 0; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (p.s0 + piece_arc(p, mid) < s) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

double cubic_segment_duration(const JointConfig& delta, const Limits& limits) {
  limits.validate(static_cast<std::size_t>(delta.size()));
  double t = 0.0;
  for (Eigen::Index j = 0; j < delta.size(); ++j) {
    const double d = std::abs(delta[j]);
    // Peak speed 1.5 d/T at the middle, peak acceleration 6 d/T² at the ends.
    t = std::max({t, 1.5 * d / limits.max_velocity[j], std::sqrt(6 * d / limits.max_acceleration[j])});
  }
  return t;
}

RawPath shortcut_spline(const RawPath& path, const Limits& limits, const CollisionWorld& world, const RobotBody& body,
                        Rng& rng, const ShortcutOptions& opts) {
  if (path.waypoints.empty()) throw InvalidInput("cannot shortcut an empty path");
  limits.validate(body.chain().dof());
  if (!(opts.resolution > 0)) throw InvalidInput("edge resolution must be positive");
  if (!(opts.margin >= 0)) throw InvalidInput("shortcut margin must be non-negative");
  if (!path_collision_free(path.waypoints, world, body, opts.resolution))
    throw InvalidInput("shortcut input must be collision-free");
  using Clock = std::chrono::steady_clock;
  std::optional<Clock::time_point> deadline;
  if (opts.budget) deadline = Clock::now() + *opts.budget;

  const std::optional<CollisionWorld> padded =
      opts.margin > 0 ? std::optional(world.with_eps(world.eps() + opts.margin)) : std::nullopt;
  const CollisionWorld& check = padded ? *padded : world;

  std::vector<JointConfig> wps = path.waypoints;
  for (int it = 0; it < opts.iterations && wps.size() > 2; ++it) {
    if (deadline && Clock::now() >= *deadline) break;
    std::vector<double> cum{0.0};
    for (std::size_t i = 1; i < wps.size(); ++i) cum.push_back(cum.back() + inf_norm(wps[i], wps[i - 1]));
    const double total = cum.back();
    double s1 = uniform(rng, 0.0, total), s2 = uniform(rng, 0.0, total);
    if (s1 > s2) std::swap(s1, s2);
    auto seg_of = [&](double s) {
      auto k = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), s) - cum.begin());
      return std::min(k == 0 ? 0 : k - 1, wps.size() - 2);
    };
    const std::size_t i1 = seg_of(s1), i2 = seg_of(s2);
    if (i1 == i2) continue;
    auto point = [&](std::size_t i, double s) -> JointConfig {
      const double h = cum[i + 1] - cum[i];
      const double u = h > 0 ? std::clamp((s - cum[i]) / h, 0.0, 1.0) : 0.0;
      if (u == 0) return wps[i];
      if (u == 1) return wps[i + 1];
      return wps[i] + (wps[i + 1] - wps[i]) * u;
    };
    const JointConfig a = point(i1, s1), b = point(i2, s2);
    std::vector<JointConfig> next(wps.begin(), wps.begin() + static_cast<std::ptrdiff_t>(i1) + 1);
    if (inf_norm(a, next.back()) > 0) next.push_back(a);
    next.push_back(b);
    for (std::size_t k = i2 + 1; k < wps.size(); ++k)
      if (k > i2 + 1 || inf_norm(wps[k], b) > 0) next.push_back(wps[k]);
    if (path_cost(next) >= path_cost(wps)) continue;
    if (!edge_collision_free(check, body, a, b, opts.resolution)) continue;
    wps = std::move(next);
  }
  RawPath out;
  out.waypoints = std::move(wps);
  out.cost = path_cost(out.waypoints);
  out.approximate = path.approximate;
  return out;
}

PathTooLong::PathTooLong(double length_, double spacing, std::size_t required_n_)
    : InvalidInput("path of ∞-norm length " + std::to_string(length_) + " rad needs at least " +
                   std::to_string(required_n_) + " waypoints at spacing " + std::to_string(spacing)),
      length(length_),
      required_n(required_n_) {}

Trajectory resample_fixed(const std::vector<JointConfig>& path, std::size_t n, double max_spacing,
                          Interpolation mode) {
  if (n < 2) throw InvalidInput("a trajectory needs at least 2 waypoints");
  if (!(max_spacing > 0)) throw InvalidInput("max spacing must be positive");
  if (path.empty()) throw InvalidInput("cannot resample an empty path");
  const JointConfig& start = path.front();
  const JointConfig& goal = path.back();

  std::vector<JointConfig> out;
  out.reserve(n);
  out.push_back(start);
  double length = 0.0;
  if (mode == Interpolation::spline) {
    const JointSpline spline(path);
    length = spline.arc_length();
    for (std::size_t k = 1; k + 1 < n; ++k) {
      const double s = length * static_cast<double>(k) / static_cast<double>(n - 1);
      out.push_back(snap(spline.at(spline.param_at_arc(s)), kFineGridBits));
    }
  } else {
    std::vector<double> cum{0.0};
    for (std::size_t i = 1; i < path.size(); ++i) cum.push_back(cum.back() + inf_norm(path[i], path[i - 1]));
    length = cum.back();
    std::size_t seg = 0;
    for (std::size_t k = 1; k + 1 < n; ++k) {
      const double s = length * static_cast<double>(k) / static_cast<double>(n - 1);
      while (seg + 2 < path.size() && cum[seg + 1] < s) ++seg;
      const double h = cum[seg + 1] - cum[seg];
      const double u = h > 0 ? std::clamp((s - cum[seg]) / h, 0.0, 1.0) : 0.0;
      out.push_back(snap(JointConfig(path[seg] + (path[seg + 1] - path[seg]) * u), kFineGridBits));
    }
  }
  out.push_back(goal);
  if (length == 0)
    for (auto& q : out) q = start;

  Trajectory t = Trajectory::from_waypoints(std::move(out));
  // Relative slack for the rounding of the arc-length split; a path of
  // exactly (n-1)·max_spacing still fits.
  if (t.max_step() > max_spacing * (1 + 1e-9)) {
    const auto required = static_cast<std::size_t>(std::ceil(length / max_spacing)) + 1;
    throw PathTooLong(length, max_spacing, std::max(required, n + 1));
  }
  return t;
}

std::optional<SmoothResult> smooth_path(const RawPath& raw, const Limits& limits, const CollisionWorld& world,
                                        const RobotBody& body, Rng& rng, const SmoothOptions& opts) {
  if (opts.attempts < 1) throw InvalidInput("smoothing needs at least one attempt");
  const double budget = path_cost(raw.waypoints);
  ShortcutOptions sc = opts.shortcut;
  for (int attempt = 0; attempt < opts.attempts; ++attempt, sc.iterations /= 2) {
    SmoothResult r;
    r.shortcut = shortcut_spline(raw, limits, world, body, rng, sc);
    for (Interpolation mode : {Interpolation::spline, Interpolation::linear}) {
      Trajectory t;
      try {
        t = resample_fixed(r.shortcut.waypoints, opts.n, opts.max_spacing, mode);
      } catch (const PathTooLong&) {
        // The polyline is the shorter of the two; only its failure is final.
        if (mode == Interpolation::linear) throw;
        continue;
      }
      if (t.cost() > budget || !t.within_limits(limits)) continue;
      if (!path_collision_free(t.waypoints, world, body, opts.resolution)) continue;
      r.trajectory = std::move(t);
      r.mode = mode;
      return r;
    }
  }
  return std::nullopt;
}

}  // namespace planfactory
