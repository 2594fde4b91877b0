#pragma once

// Planar kinematics and statics of one inverted five-bar linkage.
//
// Frame: origin at the midpoint of the ground link, motors at (-D/2, 0) and
// (+D/2, 0), the finger side is negative y and the contact plane sits at
// y = -H. Joint angles are the interior angle at each motor between the
// outward ground-link direction and the input link, in degrees.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "linkring/error.hpp"

namespace linkring {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
  friend constexpr bool operator==(Vec2, Vec2) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }
inline Vec2 mirror_x(Vec2 v) { return {-v.x, v.y}; }

inline constexpr double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }

// Link lengths in mm.
struct LinkageGeometry {
  double input_link = 35.0;   // L1, motor to elbow
  double output_link = 17.0;  // L2, elbow to effector
  double ground_link = 15.0;  // D, motor axis separation

  void validate() const {
    if (!(input_link > 0.0) || !(output_link > 0.0) || !(ground_link >= 0.0))
      throw Error(ErrorKind::ValidationError, "link lengths must be positive (ground link >= 0)");
    if (!(input_link + output_link > ground_link / 2.0))
      throw Error(ErrorKind::ValidationError, "workspace is empty on the device midline");
  }

  friend bool operator==(const LinkageGeometry&, const LinkageGeometry&) = default;
};

enum class Side { Left, Right };
enum class Branch { Upper, Lower };
enum class Elbow { Out, In };

struct ElbowConfig {
  Elbow left = Elbow::Out;
  Elbow right = Elbow::Out;
};

struct JointAngles {
  double left = 90.0;   // degrees
  double right = 90.0;  // degrees

  friend bool operator==(const JointAngles&, const JointAngles&) = default;
};

struct EffectorPose {
  double x = 0.0;  // mm
  double y = 0.0;  // mm
  Branch branch = Branch::Upper;

  Vec2 point() const { return {x, y}; }
};

// Servo-sense torques in N*m: positive drives the servo angle 180 - alpha up,
// which moves a symmetric effector toward the finger (-y).
struct JointTorques {
  double left = 0.0;
  double right = 0.0;
};

struct ForceBreakdown {
  double alpha = 0.0;  // deg, input angle
  double beta = 0.0;   // deg, output link above horizontal
  double gamma = 0.0;  // deg, between elbow force and output link
  double phi = 0.0;    // deg, between output link force and vertical
  double input_force = 0.0;        // N, F1 = tau / L1
  double output_link_force = 0.0;  // N, F2 = F1 cos(gamma)
  double normal_force = 0.0;       // N, Fn = 2 F2 cos(phi)
};

// d(x, y) / d(alpha_left, alpha_right) in mm/rad.
struct Jacobian2x2 {
  double dx_dleft = 0.0;
  double dx_dright = 0.0;
  double dy_dleft = 0.0;
  double dy_dright = 0.0;

  double det() const { return dx_dleft * dy_dright - dx_dright * dy_dleft; }
};

struct SingularityMargins {
  double det_threshold = 1.0;        // mm^2/rad^2
  double dyad_margin_deg = 2.0;      // fold/extension of one dyad
  double parallel_margin_deg = 2.0;  // output links collinear
};

enum class SingularityClass { Regular, NearSerial, NearParallel };

struct SingularityReport {
  double det = 0.0;
  SingularityClass kind = SingularityClass::Regular;
};

inline const char* to_string(Side s) { return s == Side::Left ? "left" : "right"; }
inline const char* to_string(Branch b) { return b == Branch::Upper ? "upper" : "lower"; }
inline const char* to_string(SingularityClass c) {
  switch (c) {
    case SingularityClass::Regular: return "regular";
    case SingularityClass::NearSerial: return "near_serial";
    case SingularityClass::NearParallel: return "near_parallel";
  }
  return "?";
}

inline Vec2 motor_position(const LinkageGeometry& g, Side side) {
  return {side == Side::Left ? -g.ground_link / 2.0 : g.ground_link / 2.0, 0.0};
}

inline Vec2 elbow_position(const LinkageGeometry& g, Side side, double alpha_deg) {
  const double a = deg2rad(alpha_deg);
  const double reach = g.ground_link / 2.0 + g.input_link * std::cos(a);
  return {side == Side::Left ? -reach : reach, -g.input_link * std::sin(a)};
}

namespace detail {

inline void check_angles(const JointAngles& q) {
  for (double a : {q.left, q.right}) {
    if (!(a > 0.0 && a < 180.0))
      throw Error(ErrorKind::OutOfRange, "joint angle " + std::to_string(a) + " deg outside (0, 180)");
  }
}

// Both intersections of the radius-L2 circles about the elbows, Upper first.
inline std::array<Vec2, 2> circle_intersections(const LinkageGeometry& g, Vec2 el, Vec2 er) {
  const Vec2 chord = er - el;
  const double d = norm(chord);
  const double l2 = g.output_link;
  constexpr double tol = 1e-12;
  if (d > 2.0 * l2 * (1.0 + tol) || d < tol)
    throw Error(ErrorKind::NoAssembly, "elbow distance " + std::to_string(d) + " mm cannot close with output links");
  const double half = std::min(d / 2.0, l2);
  const double h = std::sqrt(std::max(0.0, l2 * l2 - half * half));
  const Vec2 mid = 0.5 * (el + er);
  const Vec2 n{-chord.y / d, chord.x / d};
  Vec2 a = mid + h * n;
  Vec2 b = mid - h * n;
  if (a.y < b.y || (a.y == b.y && a.x < b.x)) std::swap(a, b);
  return {a, b};
}

// Left-dyad angle reaching a point; the right dyad is solved on the mirror image.
inline double solve_left_dyad(const LinkageGeometry& g, Vec2 target, Elbow elbow,
                              const SingularityMargins& margins, Side reported) {
  const Vec2 m = motor_position(g, Side::Left);
  const Vec2 d = target - m;
  const double r = norm(d);
  const double l1 = g.input_link;
  const double l2 = g.output_link;
  const double inner = std::abs(l1 - l2);
  const double outer = l1 + l2;
  if (r < inner || r > outer)
    throw Error(ErrorKind::Unreachable, std::string(to_string(reported)) + " dyad: distance " +
                                            std::to_string(r) + " mm outside [" + std::to_string(inner) +
                                            ", " + std::to_string(outer) + "]");
  const double cos_elbow = std::clamp((l1 * l1 + l2 * l2 - r * r) / (2.0 * l1 * l2), -1.0, 1.0);
  const double elbow_deg = rad2deg(std::acos(cos_elbow));
  if (elbow_deg < margins.dyad_margin_deg || elbow_deg > 180.0 - margins.dyad_margin_deg)
    throw Error(ErrorKind::NearSingular, std::string(to_string(reported)) + " dyad within " +
                                             std::to_string(margins.dyad_margin_deg) +
                                             " deg of fold/extension");
  const double cos_motor = std::clamp((l1 * l1 + r * r - l2 * l2) / (2.0 * l1 * r), -1.0, 1.0);
  const double psi = std::acos(cos_motor);
  // Out places the elbow clockwise of the motor->target ray on the left side.
  const double heading = std::atan2(d.y, d.x) + (elbow == Elbow::Out ? -psi : psi);
  const Vec2 link{std::cos(heading), std::sin(heading)};
  // link = (-cos a, -sin a)
  const double alpha = rad2deg(std::atan2(-link.y, -link.x));
  if (!(alpha > 0.0 && alpha < 180.0))
    throw Error(ErrorKind::Unreachable,
                std::string(to_string(reported)) + " dyad: solution leaves the (0, 180) deg joint range");
  return alpha;
}

struct RawJacobian {
  Jacobian2x2 j;
  double det_constraint = 0.0;  // det of the output-link direction matrix, mm^2
};

inline RawJacobian raw_jacobian(const LinkageGeometry& g, const JointAngles& q, Vec2 p) {
  const double l1 = g.input_link;
  const double al = deg2rad(q.left);
  const double ar = deg2rad(q.right);
  const Vec2 el = elbow_position(g, Side::Left, q.left);
  const Vec2 er = elbow_position(g, Side::Right, q.right);
  const Vec2 del{l1 * std::sin(al), -l1 * std::cos(al)};
  const Vec2 der{-l1 * std::sin(ar), -l1 * std::cos(ar)};
  const Vec2 ul = p - el;
  const Vec2 ur = p - er;
  // (p - e_i) . dp = (p - e_i) . de_i/da_i da_i
  const double bl = dot(ul, del);
  const double br = dot(ur, der);
  const double det_a = ul.x * ur.y - ul.y * ur.x;
  RawJacobian out;
  out.det_constraint = det_a;
  if (det_a == 0.0) return out;
  out.j.dx_dleft = ur.y * bl / det_a;
  out.j.dy_dleft = -ur.x * bl / det_a;
  out.j.dx_dright = -ul.y * br / det_a;
  out.j.dy_dright = ul.x * br / det_a;
  return out;
}

inline double angle_between_deg(Vec2 a, Vec2 b) {
  return rad2deg(std::atan2(std::abs(cross(a, b)), dot(a, b)));
}

}  // namespace detail

inline EffectorPose forward_kinematics(const LinkageGeometry& g, const JointAngles& q,
                                       Branch branch = Branch::Upper) {
  detail::check_angles(q);
  const auto pts = detail::circle_intersections(g, elbow_position(g, Side::Left, q.left),
                                                elbow_position(g, Side::Right, q.right));
  const Vec2 p = branch == Branch::Upper ? pts[0] : pts[1];
  return {p.x, p.y, branch};
}

// Branch whose intersection lies nearest to a point.
inline Branch branch_of(const LinkageGeometry& g, const JointAngles& q, Vec2 point) {
  const auto pts = detail::circle_intersections(g, elbow_position(g, Side::Left, q.left),
                                                elbow_position(g, Side::Right, q.right));
  return norm(pts[0] - point) <= norm(pts[1] - point) ? Branch::Upper : Branch::Lower;
}

inline JointAngles inverse_kinematics(const LinkageGeometry& g, Vec2 target, ElbowConfig elbows = {},
                                      const SingularityMargins& margins = {}) {
  JointAngles q;
  q.left = detail::solve_left_dyad(g, target, elbows.left, margins, Side::Left);
  q.right = detail::solve_left_dyad(g, mirror_x(target), elbows.right, margins, Side::Right);
  return q;
}

inline SingularityReport singularity_metric(const LinkageGeometry& g, const JointAngles& q,
                                            Branch branch = Branch::Upper,
                                            const SingularityMargins& margins = {}) {
  const Vec2 p = forward_kinematics(g, q, branch).point();
  const auto raw = detail::raw_jacobian(g, q, p);
  SingularityReport r;
  r.det = raw.j.det();

  const Vec2 ml = motor_position(g, Side::Left);
  const Vec2 mr = motor_position(g, Side::Right);
  const Vec2 el = elbow_position(g, Side::Left, q.left);
  const Vec2 er = elbow_position(g, Side::Right, q.right);
  for (auto [m, e] : {std::pair{ml, el}, std::pair{mr, er}}) {
    const double at_elbow = detail::angle_between_deg(m - e, p - e);
    if (at_elbow < margins.dyad_margin_deg || at_elbow > 180.0 - margins.dyad_margin_deg) {
      r.kind = SingularityClass::NearSerial;
      return r;
    }
  }
  const double between = detail::angle_between_deg(p - el, p - er);
  if (between < margins.parallel_margin_deg || between > 180.0 - margins.parallel_margin_deg ||
      raw.det_constraint == 0.0) {
    r.kind = SingularityClass::NearParallel;
    return r;
  }
  if (std::abs(r.det) < margins.det_threshold) r.kind = SingularityClass::NearSerial;
  return r;
}

inline Jacobian2x2 jacobian(const LinkageGeometry& g, const JointAngles& q, Branch branch = Branch::Upper,
                            const SingularityMargins& margins = {}) {
  const Vec2 p = forward_kinematics(g, q, branch).point();
  const auto raw = detail::raw_jacobian(g, q, p);
  const double scale = g.output_link * g.output_link;
  const double between = detail::angle_between_deg(p - elbow_position(g, Side::Left, q.left),
                                                   p - elbow_position(g, Side::Right, q.right));
  if (std::abs(raw.det_constraint) < 1e-12 * scale || between < margins.parallel_margin_deg ||
      between > 180.0 - margins.parallel_margin_deg)
    throw Error(ErrorKind::Singular, "output links within " + std::to_string(margins.parallel_margin_deg) +
                                         " deg of collinear");
  if (!(std::abs(raw.j.det()) >= margins.det_threshold))
    throw Error(ErrorKind::Singular, "|det J| = " + std::to_string(std::abs(raw.j.det())) +
                                         " below threshold " + std::to_string(margins.det_threshold));
  return raw.j;
}

// Force the effector applies to the finger, in N, using the elbow-force
// transmission model: each motor's tangential elbow force tau/L1 is projected
// onto its output link and the two link forces add at the effector. At the
// symmetric pose this reduces exactly to Fn = 2 (tau/L1) cos(gamma) cos(phi).
inline Vec2 effector_force(const LinkageGeometry& g, const JointAngles& q, JointTorques tau,
                           Branch branch = Branch::Upper, const SingularityMargins& margins = {}) {
  const Vec2 p = forward_kinematics(g, q, branch).point();
  const auto raw = detail::raw_jacobian(g, q, p);
  if (!(std::abs(raw.j.det()) >= margins.det_threshold))
    throw Error(ErrorKind::Singular, "force transmission undefined at singular pose");
  const double l1_m = g.input_link / 1000.0;
  Vec2 total;
  for (auto [side, t, a] : {std::tuple{Side::Left, tau.left, q.left}, std::tuple{Side::Right, tau.right, q.right}}) {
    const double ar = deg2rad(a);
    // Unit tangent of the elbow as the servo angle (180 - alpha) increases.
    const Vec2 tangent = side == Side::Left ? Vec2{-std::sin(ar), std::cos(ar)} : Vec2{std::sin(ar), std::cos(ar)};
    const Vec2 elbow_force = (t / l1_m) * tangent;
    const Vec2 e = elbow_position(g, side, a);
    const Vec2 link = (1.0 / norm(p - e)) * (p - e);
    total = total + dot(elbow_force, link) * link;
  }
  return total;
}

// Rigid-body static equilibrium F = J^-T tau (virtual work). Larger than the
// transmission model by 1/cos^2(gamma) at the symmetric pose.
inline Vec2 effector_force_virtual_work(const LinkageGeometry& g, const JointAngles& q, JointTorques tau,
                                        Branch branch = Branch::Upper, const SingularityMargins& margins = {}) {
  const Jacobian2x2 j = jacobian(g, q, branch, margins);
  // alpha-sense torques, jacobian in m/rad
  const double tl = -tau.left;
  const double tr = -tau.right;
  const double a = j.dx_dleft / 1000.0, b = j.dy_dleft / 1000.0;
  const double c = j.dx_dright / 1000.0, d = j.dy_dright / 1000.0;
  // [a b; c d] [Fx; Fy] = [tl; tr]
  const double det = a * d - b * c;
  return {(d * tl - b * tr) / det, (a * tr - c * tl) / det};
}

inline ForceBreakdown symmetric_normal_force(const LinkageGeometry& g, double depth_mm, double torque_nm,
                                             const SingularityMargins& margins = {}) {
  JointAngles q;
  try {
    q = inverse_kinematics(g, {0.0, -depth_mm}, {}, margins);
  } catch (const Error& e) {
    throw Error(ErrorKind::NoContactPose, "no symmetric contact pose at depth " + std::to_string(depth_mm) +
                                              " mm (" + e.what() + ")");
  }
  if (branch_of(g, q, {0.0, -depth_mm}) != Branch::Upper)
    throw Error(ErrorKind::NoContactPose, "symmetric pose at depth " + std::to_string(depth_mm) +
                                              " mm is not on the upper branch");
  const double alpha = q.left;
  const double s = (g.input_link * std::sin(deg2rad(alpha)) - depth_mm) / g.output_link;
  if (std::abs(s) > 1.0)
    throw Error(ErrorKind::NoContactPose, "output link cannot reach depth " + std::to_string(depth_mm));

  ForceBreakdown f;
  f.alpha = alpha;
  f.beta = rad2deg(std::asin(s));
  f.phi = 90.0 - f.beta;
  f.gamma = 90.0 - f.alpha + f.beta;
  f.input_force = torque_nm / (g.input_link / 1000.0);
  f.output_link_force = f.input_force * std::cos(deg2rad(f.gamma));
  f.normal_force = 2.0 * f.output_link_force * std::cos(deg2rad(f.phi));
  return f;
}

enum class CellClass : unsigned char { Reachable, Unreachable, NearSingular };

struct Bounds {
  double x_min = 0.0;
  double x_max = 0.0;
  double y_min = 0.0;
  double y_max = 0.0;
};

struct WorkspaceMap {
  Bounds bounds;
  double resolution = 1.0;
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::vector<CellClass> cells;  // row-major, row 0 at y_min

  CellClass at(std::size_t i, std::size_t j) const { return cells[j * nx + i]; }

  // Centers are laid out symmetrically about the middle of the bounds so a
  // symmetric box yields exactly mirrored coordinates.
  Vec2 center(std::size_t i, std::size_t j) const {
    const double cx = (bounds.x_min + bounds.x_max) / 2.0;
    const double cy = (bounds.y_min + bounds.y_max) / 2.0;
    const auto off = [this](std::size_t k, std::size_t n) {
      return (2.0 * static_cast<double>(k) + 1.0 - static_cast<double>(n)) * resolution / 2.0;
    };
    return {cx + off(i, nx), cy + off(j, ny)};
  }

  std::size_t count(CellClass c) const {
    std::size_t n = 0;
    for (auto v : cells) n += (v == c);
    return n;
  }
};

inline CellClass classify_point(const LinkageGeometry& g, Vec2 p, ElbowConfig elbows,
                                const SingularityMargins& margins) {
  const double inner = std::abs(g.input_link - g.output_link);
  const double outer = g.input_link + g.output_link;
  for (Side s : {Side::Left, Side::Right}) {
    const double r = norm(p - motor_position(g, s));
    if (r < inner || r > outer) return CellClass::Unreachable;
  }
  JointAngles q;
  try {
    q = inverse_kinematics(g, p, elbows, margins);
  } catch (const Error& e) {
    return e.kind() == ErrorKind::NearSingular ? CellClass::NearSingular : CellClass::Unreachable;
  }
  try {
    const auto rep = singularity_metric(g, q, branch_of(g, q, p), margins);
    if (rep.kind != SingularityClass::Regular) return CellClass::NearSingular;
  } catch (const Error&) {
    return CellClass::NearSingular;
  }
  return CellClass::Reachable;
}

inline WorkspaceMap workspace_grid(const LinkageGeometry& g, const Bounds& bounds, double resolution,
                                   ElbowConfig elbows = {}, const SingularityMargins& margins = {}) {
  if (!(resolution > 0.0)) throw Error(ErrorKind::ValidationError, "resolution must be positive");
  WorkspaceMap map;
  map.bounds = bounds;
  map.resolution = resolution;
  const double w = bounds.x_max - bounds.x_min;
  const double h = bounds.y_max - bounds.y_min;
  if (!(w > 0.0) || !(h > 0.0)) return map;
  map.nx = static_cast<std::size_t>(std::floor(w / resolution + 1e-9));
  map.ny = static_cast<std::size_t>(std::floor(h / resolution + 1e-9));
  map.cells.resize(map.nx * map.ny);
  for (std::size_t j = 0; j < map.ny; ++j)
    for (std::size_t i = 0; i < map.nx; ++i)
      map.cells[j * map.nx + i] = classify_point(g, map.center(i, j), elbows, margins);
  return map;
}

// Largest X such that every point (x, -depth) with |x| <= X, sampled at
// `step`, is Reachable. Returns a negative value when the midline point
// itself is not.
inline double reachable_half_span(const LinkageGeometry& g, double depth, ElbowConfig elbows = {},
                                  const SingularityMargins& margins = {}, double step = 0.01) {
  if (classify_point(g, {0.0, -depth}, elbows, margins) != CellClass::Reachable) return -1.0;
  const double limit = g.input_link + g.output_link + g.ground_link;
  double reached = 0.0;
  for (double x = step; x <= limit; x += step) {
    if (classify_point(g, {x, -depth}, elbows, margins) != CellClass::Reachable ||
        classify_point(g, {-x, -depth}, elbows, margins) != CellClass::Reachable)
      break;
    reached = x;
  }
  return reached;
}

}  // namespace linkring
