#pragma once

// Tactile patterns: declarative static contact layouts and slippage sweeps,
// compiled into fixed-rate effector trajectories and joint schedules.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "linkring/device.hpp"
#include "linkring/json_util.hpp"

namespace linkring {

enum class Slot { Left, Center, Right };
enum class Direction { LeftToRight, RightToLeft };
enum class PatternKind { Static, Slippage };

inline constexpr std::array<double, 3> kDefaultSpeeds{43.0, 60.0, 86.0};  // mm/s: slow, middle, fast

struct StaticPattern {
  int id = 1;
  Slot a = Slot::Center;
  Slot b = Slot::Center;
  double press = 1.0;  // mm
  double hold = 3.0;   // s

  friend bool operator==(const StaticPattern&, const StaticPattern&) = default;
};

struct Sweep {
  double speed = 43.0;  // mm/s
  Direction direction = Direction::LeftToRight;

  friend bool operator==(const Sweep&, const Sweep&) = default;
};

struct SlippagePattern {
  int id = 1;
  Sweep a;
  Sweep b;
  double span = 10.0;  // mm

  friend bool operator==(const SlippagePattern&, const SlippagePattern&) = default;
};

struct PatternCatalog {
  std::string name;
  std::vector<double> speed_set{kDefaultSpeeds.begin(), kDefaultSpeeds.end()};
  std::vector<StaticPattern> statics;
  std::vector<SlippagePattern> slippage;

  // Static patterns take precedence when a catalog holds both kinds.
  PatternKind kind() const { return statics.empty() && !slippage.empty() ? PatternKind::Slippage : PatternKind::Static; }

  std::vector<int> ids(PatternKind k) const {
    std::vector<int> out;
    if (k == PatternKind::Static)
      for (const auto& p : statics) out.push_back(p.id);
    else
      for (const auto& p : slippage) out.push_back(p.id);
    std::sort(out.begin(), out.end());
    return out;
  }
  std::vector<int> ids() const { return ids(kind()); }

  const StaticPattern* find_static(int id) const {
    for (const auto& p : statics)
      if (p.id == id) return &p;
    return nullptr;
  }
  const SlippagePattern* find_slippage(int id) const {
    for (const auto& p : slippage)
      if (p.id == id) return &p;
    return nullptr;
  }

  void validate() const {
    if (speed_set.empty()) throw Error(ErrorKind::ValidationError, "speed set is empty");
    for (double s : speed_set)
      if (!(s > 0.0)) throw Error(ErrorKind::ValidationError, "speed set entries must be positive");
    const auto check_ids = [](std::vector<int> ids, const char* what) {
      std::sort(ids.begin(), ids.end());
      for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i > 0 && ids[i] == ids[i - 1])
          throw Error(ErrorKind::ValidationError, std::string("duplicate ") + what + " id " + std::to_string(ids[i]));
        if (ids[i] != static_cast<int>(i) + 1)
          throw Error(ErrorKind::ValidationError, std::string(what) + " ids must be dense from 1");
      }
    };
    std::vector<int> sid, pid;
    for (const auto& p : statics) {
      sid.push_back(p.id);
      if (!std::isfinite(p.press)) throw Error(ErrorKind::ValidationError, "static press must be finite");
      if (!(p.hold > 0.0)) throw Error(ErrorKind::ValidationError, "static hold must be positive");
    }
    for (const auto& p : slippage) {
      pid.push_back(p.id);
      for (const Sweep& s : {p.a, p.b}) {
        const bool known = std::any_of(speed_set.begin(), speed_set.end(),
                                       [&](double v) { return std::abs(v - s.speed) <= 1e-9; });
        if (!known)
          throw Error(ErrorKind::ValidationError, "slippage " + std::to_string(p.id) + ": speed " +
                                                      std::to_string(s.speed) + " not in the declared speed set");
      }
      if (!(p.span >= 0.0)) throw Error(ErrorKind::ValidationError, "slippage span must be >= 0");
    }
    check_ids(sid, "static");
    check_ids(pid, "slippage");
  }

  friend bool operator==(const PatternCatalog&, const PatternCatalog&) = default;
};

// Ids 1..9 enumerate (A, B) slots in row-major order over Left, Center, Right.
inline PatternCatalog default_static_catalog() {
  PatternCatalog c;
  c.name = "static";
  const Slot slots[] = {Slot::Left, Slot::Center, Slot::Right};
  int id = 1;
  for (Slot a : slots)
    for (Slot b : slots) c.statics.push_back({id++, a, b, 1.0, 3.0});
  return c;
}

// Patterns 2 and 3 drive the effectors at different speeds; the rest are equal.
inline PatternCatalog default_slippage_catalog() {
  constexpr double slow = kDefaultSpeeds[0], middle = kDefaultSpeeds[1], fast = kDefaultSpeeds[2];
  constexpr auto ltr = Direction::LeftToRight;
  constexpr auto rtl = Direction::RightToLeft;
  PatternCatalog c;
  c.name = "slippage";
  c.slippage = {
      {1, {slow, ltr}, {slow, ltr}, 10.0},
      {2, {fast, ltr}, {slow, ltr}, 10.0},
      {3, {slow, rtl}, {fast, rtl}, 10.0},
      {4, {middle, ltr}, {middle, ltr}, 10.0},
      {5, {fast, rtl}, {fast, rtl}, 10.0},
  };
  return c;
}

namespace detail {

inline const char* slot_name(Slot s) {
  switch (s) {
    case Slot::Left: return "left";
    case Slot::Center: return "center";
    case Slot::Right: return "right";
  }
  return "?";
}

inline Slot slot_from(const std::string& s) {
  if (s == "left") return Slot::Left;
  if (s == "center") return Slot::Center;
  if (s == "right") return Slot::Right;
  throw Error(ErrorKind::ValidationError, "unknown slot '" + s + "'");
}

inline const char* direction_name(Direction d) {
  return d == Direction::LeftToRight ? "left_to_right" : "right_to_left";
}

inline Direction direction_from(const std::string& s) {
  if (s == "left_to_right") return Direction::LeftToRight;
  if (s == "right_to_left") return Direction::RightToLeft;
  throw Error(ErrorKind::ValidationError, "unknown direction '" + s + "'");
}

inline Sweep sweep_from(const json& j, std::string_view where) {
  require_known_keys(j, {"speed", "dir"}, where);
  if (!j.contains("speed") || !j.contains("dir"))
    throw Error(ErrorKind::ValidationError, std::string(where) + " needs speed and dir");
  return {get_or(j, "speed", 0.0, where), direction_from(get_or<std::string>(j, "dir", "", where))};
}

}  // namespace detail

inline json catalog_to_json(const PatternCatalog& c) {
  json statics = json::array();
  for (const auto& p : c.statics)
    statics.push_back({{"id", p.id},
                       {"a_slot", detail::slot_name(p.a)},
                       {"b_slot", detail::slot_name(p.b)},
                       {"press_mm", p.press},
                       {"hold_s", p.hold}});
  json slips = json::array();
  for (const auto& p : c.slippage)
    slips.push_back({{"id", p.id},
                     {"a", {{"speed", p.a.speed}, {"dir", detail::direction_name(p.a.direction)}}},
                     {"b", {{"speed", p.b.speed}, {"dir", detail::direction_name(p.b.direction)}}},
                     {"span_mm", p.span}});
  return {{"name", c.name}, {"speed_set_mm_s", c.speed_set}, {"static", statics}, {"slippage", slips}};
}

inline std::string serialize_catalog(const PatternCatalog& c) { return catalog_to_json(c).dump(2) + "\n"; }

inline PatternCatalog catalog_from_json(const json& j) {
  require_known_keys(j, {"name", "speed_set_mm_s", "static", "slippage"}, "catalog");
  PatternCatalog c;
  c.name = get_or<std::string>(j, "name", "", "catalog");
  c.speed_set = get_or(j, "speed_set_mm_s", c.speed_set, "catalog");
  if (j.contains("static")) {
    if (!j["static"].is_array()) throw Error(ErrorKind::ValidationError, "'static' must be an array");
    for (const auto& e : j["static"]) {
      require_known_keys(e, {"id", "a_slot", "b_slot", "press_mm", "hold_s"}, "static entry");
      if (!e.contains("id")) throw Error(ErrorKind::ValidationError, "static entry without id");
      StaticPattern p;
      p.id = get_or(e, "id", 0, "static entry");
      p.a = detail::slot_from(get_or<std::string>(e, "a_slot", "center", "static entry"));
      p.b = detail::slot_from(get_or<std::string>(e, "b_slot", "center", "static entry"));
      p.press = get_or(e, "press_mm", p.press, "static entry");
      p.hold = get_or(e, "hold_s", p.hold, "static entry");
      c.statics.push_back(p);
    }
  }
  if (j.contains("slippage")) {
    if (!j["slippage"].is_array()) throw Error(ErrorKind::ValidationError, "'slippage' must be an array");
    for (const auto& e : j["slippage"]) {
      require_known_keys(e, {"id", "a", "b", "span_mm"}, "slippage entry");
      if (!e.contains("id") || !e.contains("a") || !e.contains("b"))
        throw Error(ErrorKind::ValidationError, "slippage entry needs id, a and b");
      SlippagePattern p;
      p.id = get_or(e, "id", 0, "slippage entry");
      p.a = detail::sweep_from(e["a"], "slippage a");
      p.b = detail::sweep_from(e["b"], "slippage b");
      p.span = get_or(e, "span_mm", p.span, "slippage entry");
      c.slippage.push_back(p);
    }
  }
  c.validate();
  return c;
}

inline PatternCatalog load_catalog(std::string_view bytes) { return catalog_from_json(parse_json_text(bytes)); }

inline double slot_x(Slot s, const DeviceCalibration& cal) {
  switch (s) {
    case Slot::Left: return -cal.lateral_range / 2.0;
    case Slot::Center: return 0.0;
    case Slot::Right: return cal.lateral_range / 2.0;
  }
  return 0.0;
}

inline std::vector<EffectorTarget> static_targets(const StaticPattern& p, const DeviceCalibration& cal) {
  if (p.press > cal.press_depth_max + 1e-12)
    throw Error(ErrorKind::OutOfRange, "pattern " + std::to_string(p.id) + ": press " + std::to_string(p.press) +
                                           " mm exceeds " + std::to_string(cal.press_depth_max));
  return {{Effector::A, slot_x(p.a, cal), p.press}, {Effector::B, slot_x(p.b, cal), p.press}};
}

struct TrajectorySample {
  double t = 0.0;                   // s
  std::array<double, 2> x{};        // mm, effectors A and B
  std::array<double, 2> depth{};    // mm below the motor axis line
};

struct Trajectory {
  double rate = 50.0;  // Hz
  std::vector<TrajectorySample> samples;
};

inline Trajectory static_trajectory(const StaticPattern& p, const DeviceCalibration& cal, double rate) {
  if (!(rate > 0.0)) throw Error(ErrorKind::ValidationError, "rate must be positive");
  const auto targets = static_targets(p, cal);
  for (const auto& t : targets)
    if (std::abs(t.x) > cal.lateral_range + 1e-12) throw Error(ErrorKind::OutOfRange, "slot outside lateral range");
  Trajectory traj;
  traj.rate = rate;
  const auto n = static_cast<std::size_t>(std::llround(p.hold * rate));
  traj.samples.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    TrajectorySample s;
    s.t = static_cast<double>(k) / rate;
    for (const auto& t : targets) {
      const auto i = static_cast<std::size_t>(t.effector);
      s.x[i] = t.x;
      s.depth[i] = cal.contact_depth + t.press;
    }
    traj.samples.push_back(s);
  }
  return traj;
}

// Both effectors start together at contact depth and sweep `span` at their
// own constant speed; the faster one holds its end position until the slower
// one arrives. The final sample lands exactly on the end position.
inline Trajectory slippage_trajectory(const SlippagePattern& p, const DeviceCalibration& cal, double rate) {
  if (!(rate > 0.0)) throw Error(ErrorKind::ValidationError, "rate must be positive");
  if (!(p.span >= 0.0) || p.span > 2.0 * cal.lateral_range + 1e-12)
    throw Error(ErrorKind::OutOfRange, "slippage " + std::to_string(p.id) + ": span " + std::to_string(p.span) +
                                           " mm exceeds twice the lateral range " +
                                           std::to_string(cal.lateral_range));
  const std::array<Sweep, 2> sweeps{p.a, p.b};
  double duration = 0.0;
  for (const auto& s : sweeps) {
    if (!(s.speed > 0.0)) throw Error(ErrorKind::ValidationError, "sweep speed must be positive");
    duration = std::max(duration, p.span / s.speed);
  }
  const auto last = static_cast<std::size_t>(std::ceil(duration * rate - 1e-9));
  Trajectory traj;
  traj.rate = rate;
  traj.samples.reserve(last + 1);
  for (std::size_t k = 0; k <= last; ++k) {
    TrajectorySample s;
    s.t = static_cast<double>(k) / rate;
    for (std::size_t i = 0; i < 2; ++i) {
      const double sign = sweeps[i].direction == Direction::LeftToRight ? 1.0 : -1.0;
      const double start = -sign * p.span / 2.0;
      s.x[i] = start + sign * std::min(sweeps[i].speed * s.t, p.span);
      s.depth[i] = cal.contact_depth;
    }
    traj.samples.push_back(s);
  }
  return traj;
}

enum class Phase { LeadIn, Stimulus, LeadOut };

inline const char* to_string(Phase p) {
  switch (p) {
    case Phase::LeadIn: return "lead_in";
    case Phase::Stimulus: return "stimulus";
    case Phase::LeadOut: return "lead_out";
  }
  return "?";
}

struct ScheduleEntry {
  double t = 0.0;
  std::array<double, 4> alpha{};  // deg: A left, A right, B left, B right
  Phase phase = Phase::Stimulus;
};

struct JointSchedule {
  double rate = 50.0;
  std::vector<ScheduleEntry> entries;

  std::size_t stimulus_count() const {
    return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(),
                                                  [](const ScheduleEntry& e) { return e.phase == Phase::Stimulus; }));
  }
};

inline std::size_t motor_index(Effector e, Side s) {
  return (e == Effector::A ? 0u : 2u) + (s == Side::Right ? 1u : 0u);
}

// One IK solve per sample per linkage. Stimulus samples keep their trajectory
// timestamps; lead-in occupies the `lead_time` before t = 0 and lead-out the
// `lead_time` after the last sample, both interpolated linearly in task space
// from/to the hover pose above the adjacent stimulus sample.
inline JointSchedule compile_schedule(const Trajectory& traj, const DeviceConfig& cfg, const DeviceCalibration& cal,
                                      std::optional<double> lead_time = std::nullopt) {
  if (!(traj.rate > 0.0)) throw Error(ErrorKind::ValidationError, "rate must be positive");
  const double rate = traj.rate;
  const auto lead = static_cast<std::size_t>(std::llround(lead_time.value_or(cfg.lead_time) * rate));
  const double hover_depth = cal.contact_depth - cfg.hover_gap;

  struct Point {
    std::array<double, 2> x{};
    std::array<double, 2> depth{};
  };
  std::vector<std::pair<Point, Phase>> path;
  path.reserve(traj.samples.size() + 2 * lead);
  const Point first = traj.samples.empty() ? Point{{0.0, 0.0}, {hover_depth, hover_depth}}
                                           : Point{traj.samples.front().x, traj.samples.front().depth};
  const Point last = traj.samples.empty() ? first : Point{traj.samples.back().x, traj.samples.back().depth};
  const auto blend = [](const Point& from, const Point& to, double f) {
    Point p;
    for (std::size_t i = 0; i < 2; ++i) {
      p.x[i] = from.x[i] + f * (to.x[i] - from.x[i]);
      p.depth[i] = from.depth[i] + f * (to.depth[i] - from.depth[i]);
    }
    return p;
  };
  const Point hover_in{first.x, {hover_depth, hover_depth}};
  const Point hover_out{last.x, {hover_depth, hover_depth}};
  for (std::size_t k = 0; k < lead; ++k)
    path.emplace_back(blend(hover_in, first, static_cast<double>(k) / static_cast<double>(lead)), Phase::LeadIn);
  for (const auto& s : traj.samples) path.emplace_back(Point{s.x, s.depth}, Phase::Stimulus);
  for (std::size_t k = 1; k <= lead; ++k)
    path.emplace_back(blend(last, hover_out, static_cast<double>(k) / static_cast<double>(lead)), Phase::LeadOut);

  JointSchedule sched;
  sched.rate = rate;
  sched.entries.reserve(path.size());
  for (std::size_t i = 0; i < path.size(); ++i) {
    const auto& [pt, phase] = path[i];
    ScheduleEntry e;
    e.t = (static_cast<double>(i) - static_cast<double>(lead)) / rate;
    e.phase = phase;
    for (Effector eff : {Effector::A, Effector::B}) {
      const auto k = static_cast<std::size_t>(eff);
      JointAngles q;
      try {
        q = inverse_kinematics(cfg.linkage(eff), {pt.x[k], -pt.depth[k]}, cfg.elbows, cfg.margins);
      } catch (const Error& err) {
        throw Error(err.kind(), "schedule entry " + std::to_string(i) + ", effector " + to_string(eff) + ": " +
                                    err.what());
      }
      e.alpha[motor_index(eff, Side::Left)] = q.left;
      e.alpha[motor_index(eff, Side::Right)] = q.right;
    }
    sched.entries.push_back(e);
  }
  return sched;
}

inline JointSchedule compile_static(const StaticPattern& p, const DeviceConfig& cfg, const DeviceCalibration& cal,
                                    std::optional<double> lead_time = std::nullopt) {
  return compile_schedule(static_trajectory(p, cal, cfg.control_rate), cfg, cal, lead_time);
}

inline JointSchedule compile_slippage(const SlippagePattern& p, const DeviceConfig& cfg, const DeviceCalibration& cal,
                                      std::optional<double> lead_time = std::nullopt) {
  return compile_schedule(slippage_trajectory(p, cal, cfg.control_rate), cfg, cal, lead_time);
}

// Compiles pattern `id` of the catalog's primary kind.
inline JointSchedule compile_pattern(const PatternCatalog& catalog, int id, const DeviceConfig& cfg,
                                     const DeviceCalibration& cal) {
  if (catalog.kind() == PatternKind::Static) {
    if (const auto* p = catalog.find_static(id)) return compile_static(*p, cfg, cal);
  } else if (const auto* p = catalog.find_slippage(id)) {
    return compile_slippage(*p, cfg, cal);
  }
  throw Error(ErrorKind::ValidationError, "catalog '" + catalog.name + "' has no pattern " + std::to_string(id));
}

}  // namespace linkring
