#pragma once

#include <cmath>
#include <string>

#include "linkring/error.hpp"

namespace linkring {

enum class Effector { A, B };

inline const char* to_string(Effector e) { return e == Effector::A ? "A" : "B"; }

inline constexpr double kStandardGravity = 9.80665;

inline constexpr double kgcm_to_nm(double kgcm) { return kgcm * kStandardGravity / 100.0; }

// One hobby servo and the linear pulse map it is driven with. Defaults are a
// Hitec HS-40 on the common 600-2400 us / 0-180 deg map.
struct ServoSpec {
  int channel = 0;
  Effector linkage = Effector::A;
  bool right_side = false;
  double pulse_min = 600.0;   // us
  double pulse_max = 2400.0;  // us
  double angle_min = 0.0;     // deg, servo frame
  double angle_max = 180.0;   // deg, servo frame
  double mount_offset = 0.0;  // deg
  int direction = 1;          // +1 or -1
  double stall_torque = kgcm_to_nm(0.6);  // N*m

  void validate() const {
    if (channel < 0 || channel > 3)
      throw Error(ErrorKind::ValidationError, "servo channel " + std::to_string(channel) + " outside 0-3");
    if (!(pulse_min < pulse_max)) throw Error(ErrorKind::ValidationError, "pulse_min must be < pulse_max");
    if (!(angle_min < angle_max)) throw Error(ErrorKind::ValidationError, "angle_min must be < angle_max");
    if (direction != 1 && direction != -1) throw Error(ErrorKind::ValidationError, "direction must be +1 or -1");
  }

  friend bool operator==(const ServoSpec&, const ServoSpec&) = default;
};

// Servo-frame angle for a linkage interior angle: theta = dir * (180 - alpha) + offset.
inline double servo_angle(const ServoSpec& spec, double alpha_deg) {
  return spec.direction * (180.0 - alpha_deg) + spec.mount_offset;
}

inline int angle_to_pulse(const ServoSpec& spec, double alpha_deg) {
  const double theta = servo_angle(spec, alpha_deg);
  if (!(theta >= spec.angle_min && theta <= spec.angle_max))
    throw Error(ErrorKind::AngleOutOfRange, "channel " + std::to_string(spec.channel) + ": servo angle " +
                                                std::to_string(theta) + " deg outside [" +
                                                std::to_string(spec.angle_min) + ", " +
                                                std::to_string(spec.angle_max) + "]");
  const double frac = (theta - spec.angle_min) / (spec.angle_max - spec.angle_min);
  return static_cast<int>(std::lround(spec.pulse_min + frac * (spec.pulse_max - spec.pulse_min)));
}

}  // namespace linkring
