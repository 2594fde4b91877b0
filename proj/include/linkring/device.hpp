#pragma once

// Two linkages composed into the ring device: calibration from the finger
// profile, effector targets bound to inverse kinematics, contact classification.

#include <algorithm>
#include <array>
#include <optional>
#include <span>
#include <string>

#include "linkring/error.hpp"
#include "linkring/kinematics.hpp"
#include "linkring/servo_spec.hpp"

namespace linkring {

struct TransportConfig {
  std::string device;  // empty: loopback
  int baud = 115200;

  friend bool operator==(const TransportConfig&, const TransportConfig&) = default;
};

struct DeviceConfig {
  LinkageGeometry linkage_a;
  LinkageGeometry linkage_b;
  double spacer = 26.0;           // mm between effectors along the finger
  double standoff = 14.5;         // mm, H = standoff + thickness / 2
  double hover_gap = 3.0;         // mm above the contact plane
  double press_depth_max = 2.0;   // mm
  double contact_epsilon = 0.1;   // mm
  double lateral_margin = 1.0;    // mm kept clear of the workspace edge
  SingularityMargins margins;
  ElbowConfig elbows;
  std::array<ServoSpec, 4> servos = default_servos();
  double control_rate = 50.0;     // Hz
  double lead_time = 0.3;         // s, ramps from and to hover
  TransportConfig transport;
  int port = 7430;

  static std::array<ServoSpec, 4> default_servos() {
    std::array<ServoSpec, 4> s{};
    for (int i = 0; i < 4; ++i) {
      s[i].channel = i;
      s[i].linkage = i < 2 ? Effector::A : Effector::B;
      s[i].right_side = (i % 2) == 1;
    }
    return s;
  }

  const LinkageGeometry& linkage(Effector e) const { return e == Effector::A ? linkage_a : linkage_b; }

  void validate() const {
    linkage_a.validate();
    linkage_b.validate();
    if (!(spacer > 0.0)) throw Error(ErrorKind::ValidationError, "spacer must be positive");
    if (!(hover_gap >= 0.0)) throw Error(ErrorKind::ValidationError, "hover_gap must be >= 0");
    if (!(press_depth_max >= 0.0)) throw Error(ErrorKind::ValidationError, "press_depth_max must be >= 0");
    if (!(contact_epsilon > 0.0)) throw Error(ErrorKind::ValidationError, "contact_epsilon must be positive");
    if (!(control_rate > 0.0)) throw Error(ErrorKind::ValidationError, "control_rate must be positive");
    if (!(lead_time >= 0.0)) throw Error(ErrorKind::ValidationError, "lead_time must be >= 0");
    std::array<bool, 4> seen{};
    std::array<bool, 4> motor{};
    for (const auto& s : servos) {
      s.validate();
      if (seen[s.channel]) throw Error(ErrorKind::ValidationError, "duplicate servo channel");
      seen[s.channel] = true;
      const int m = (s.linkage == Effector::A ? 0 : 2) + (s.right_side ? 1 : 0);
      if (motor[m]) throw Error(ErrorKind::ValidationError, "two servos mapped to the same motor");
      motor[m] = true;
    }
  }
};

struct FingerProfile {
  double thickness = 15.0;  // mm
  double width = 16.0;      // mm
};

struct DeviceCalibration {
  double contact_depth = 22.0;   // H, mm
  double lateral_range = 8.0;    // mm, half-width of the usable sweep
  double press_depth_max = 2.0;  // mm

  friend bool operator==(const DeviceCalibration&, const DeviceCalibration&) = default;
};

struct EffectorTarget {
  Effector effector = Effector::A;
  double x = 0.0;      // mm
  double press = 0.0;  // mm; 0 surface contact, > 0 indentation, < 0 hover
};

enum class ContactState { Hover, Contact, Pressing };

inline const char* to_string(ContactState c) {
  switch (c) {
    case ContactState::Hover: return "hover";
    case ContactState::Contact: return "contact";
    case ContactState::Pressing: return "pressing";
  }
  return "?";
}

inline double contact_depth(const FingerProfile& finger, const DeviceConfig& cfg) {
  return cfg.standoff + finger.thickness / 2.0;
}

inline DeviceCalibration calibrate(const FingerProfile& finger, const DeviceConfig& cfg) {
  if (!(finger.thickness > 0.0) || !(finger.width > 0.0))
    throw Error(ErrorKind::OutOfRange, "finger thickness and width must be positive");
  DeviceCalibration cal;
  cal.contact_depth = contact_depth(finger, cfg);
  cal.press_depth_max = cfg.press_depth_max;

  // Every depth a pattern can command must be reachable along the sweep.
  const double depths[] = {cal.contact_depth - cfg.hover_gap, cal.contact_depth,
                           cal.contact_depth + cfg.press_depth_max};
  double limit = cfg.linkage_a.input_link + cfg.linkage_a.output_link;
  for (Effector e : {Effector::A, Effector::B}) {
    for (double depth : depths) {
      const double span = reachable_half_span(cfg.linkage(e), depth, cfg.elbows, cfg.margins);
      if (span < 0.0)
        throw Error(ErrorKind::OutOfRange, "no symmetric pose for linkage " + std::string(to_string(e)) +
                                               " at depth " + std::to_string(depth) + " mm");
      limit = std::min(limit, span);
    }
  }
  cal.lateral_range = std::max(0.0, std::min(finger.width / 2.0, limit - cfg.lateral_margin));
  return cal;
}

inline Vec2 target_point(const DeviceCalibration& cal, double x, double press) {
  return {x, -(cal.contact_depth + press)};
}

// Joint angles for linkages A and B. An effector without a target hovers at
// hover_x[effector] above the contact plane.
inline std::array<JointAngles, 2> device_targets(const DeviceCalibration& cal, const DeviceConfig& cfg,
                                                 std::span<const EffectorTarget> targets,
                                                 std::array<double, 2> hover_x = {0.0, 0.0}) {
  std::array<std::optional<EffectorTarget>, 2> slot;
  for (const auto& t : targets) {
    const auto idx = static_cast<std::size_t>(t.effector);
    if (slot[idx]) throw Error(ErrorKind::ValidationError, "more than one target for effector " +
                                                               std::string(to_string(t.effector)));
    if (std::abs(t.x) > cal.lateral_range + 1e-12)
      throw Error(ErrorKind::OutOfRange, "effector " + std::string(to_string(t.effector)) + ": |x| = " +
                                             std::to_string(std::abs(t.x)) + " exceeds lateral range " +
                                             std::to_string(cal.lateral_range));
    if (t.press > cal.press_depth_max + 1e-12)
      throw Error(ErrorKind::OutOfRange, "effector " + std::string(to_string(t.effector)) + ": press " +
                                             std::to_string(t.press) + " exceeds " +
                                             std::to_string(cal.press_depth_max));
    slot[idx] = t;
  }
  std::array<JointAngles, 2> out;
  for (Effector e : {Effector::A, Effector::B}) {
    const auto idx = static_cast<std::size_t>(e);
    const EffectorTarget t = slot[idx].value_or(EffectorTarget{e, hover_x[idx], -cfg.hover_gap});
    try {
      out[idx] = inverse_kinematics(cfg.linkage(e), target_point(cal, t.x, t.press), cfg.elbows, cfg.margins);
    } catch (const Error& err) {
      throw Error(err.kind(), "effector " + std::string(to_string(e)) + ": " + err.what());
    }
  }
  return out;
}

inline ContactState contact_state(const DeviceCalibration& cal, const EffectorPose& pose, double epsilon = 0.1) {
  const double depth = -pose.y;
  if (std::abs(depth - cal.contact_depth) <= epsilon) return ContactState::Contact;
  if (depth > cal.contact_depth + epsilon) return ContactState::Pressing;
  return ContactState::Hover;
}

}  // namespace linkring
