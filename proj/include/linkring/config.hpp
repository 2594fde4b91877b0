#pragma once

// JSON device configuration. Every key is optional; unknown keys are errors.

#include <fstream>
#include <sstream>
#include <string>

#include "linkring/device.hpp"
#include "linkring/json_util.hpp"

namespace linkring {

namespace detail {

inline LinkageGeometry geometry_from_json(const json& j, const LinkageGeometry& d, std::string_view where) {
  require_known_keys(j, {"input_link_mm", "output_link_mm", "ground_link_mm"}, where);
  LinkageGeometry g;
  g.input_link = get_or(j, "input_link_mm", d.input_link, where);
  g.output_link = get_or(j, "output_link_mm", d.output_link, where);
  g.ground_link = get_or(j, "ground_link_mm", d.ground_link, where);
  return g;
}

inline json geometry_to_json(const LinkageGeometry& g) {
  return {{"input_link_mm", g.input_link}, {"output_link_mm", g.output_link}, {"ground_link_mm", g.ground_link}};
}

inline Elbow elbow_from_string(const std::string& s) {
  if (s == "out") return Elbow::Out;
  if (s == "in") return Elbow::In;
  throw Error(ErrorKind::ValidationError, "elbow must be 'out' or 'in', got '" + s + "'");
}

inline ServoSpec servo_from_json(const json& j, const ServoSpec& d) {
  constexpr std::string_view where = "servo";
  require_known_keys(j,
                     {"channel", "linkage", "side", "pulse_min_us", "pulse_max_us", "angle_min_deg",
                      "angle_max_deg", "mount_offset_deg", "direction", "stall_torque_nm"},
                     where);
  ServoSpec s = d;
  s.channel = get_or(j, "channel", d.channel, where);
  const auto linkage = get_or<std::string>(j, "linkage", to_string(d.linkage), where);
  if (linkage != "A" && linkage != "B") throw Error(ErrorKind::ValidationError, "servo linkage must be A or B");
  s.linkage = linkage == "A" ? Effector::A : Effector::B;
  const auto side = get_or<std::string>(j, "side", d.right_side ? "right" : "left", where);
  if (side != "left" && side != "right") throw Error(ErrorKind::ValidationError, "servo side must be left or right");
  s.right_side = side == "right";
  s.pulse_min = get_or(j, "pulse_min_us", d.pulse_min, where);
  s.pulse_max = get_or(j, "pulse_max_us", d.pulse_max, where);
  s.angle_min = get_or(j, "angle_min_deg", d.angle_min, where);
  s.angle_max = get_or(j, "angle_max_deg", d.angle_max, where);
  s.mount_offset = get_or(j, "mount_offset_deg", d.mount_offset, where);
  s.direction = get_or(j, "direction", d.direction, where);
  s.stall_torque = get_or(j, "stall_torque_nm", d.stall_torque, where);
  return s;
}

}  // namespace detail

inline DeviceConfig device_config_from_json(const json& j) {
  require_known_keys(j,
                     {"linkage_a", "linkage_b", "spacer_mm", "standoff_mm", "hover_gap_mm", "press_depth_max_mm",
                      "contact_epsilon_mm", "lateral_margin_mm", "singularity", "elbows", "servos",
                      "control_rate_hz", "lead_time_s", "transport", "port"},
                     "device config");
  constexpr std::string_view where = "device config";
  DeviceConfig c;
  if (j.contains("linkage_a")) c.linkage_a = detail::geometry_from_json(j["linkage_a"], c.linkage_a, "linkage_a");
  if (j.contains("linkage_b")) c.linkage_b = detail::geometry_from_json(j["linkage_b"], c.linkage_b, "linkage_b");
  c.spacer = get_or(j, "spacer_mm", c.spacer, where);
  c.standoff = get_or(j, "standoff_mm", c.standoff, where);
  c.hover_gap = get_or(j, "hover_gap_mm", c.hover_gap, where);
  c.press_depth_max = get_or(j, "press_depth_max_mm", c.press_depth_max, where);
  c.contact_epsilon = get_or(j, "contact_epsilon_mm", c.contact_epsilon, where);
  c.lateral_margin = get_or(j, "lateral_margin_mm", c.lateral_margin, where);
  if (j.contains("singularity")) {
    const auto& s = j["singularity"];
    require_known_keys(s, {"det_threshold_mm2_rad2", "dyad_margin_deg", "parallel_margin_deg"}, "singularity");
    c.margins.det_threshold = get_or(s, "det_threshold_mm2_rad2", c.margins.det_threshold, "singularity");
    c.margins.dyad_margin_deg = get_or(s, "dyad_margin_deg", c.margins.dyad_margin_deg, "singularity");
    c.margins.parallel_margin_deg = get_or(s, "parallel_margin_deg", c.margins.parallel_margin_deg, "singularity");
  }
  if (j.contains("elbows")) {
    const auto& e = j["elbows"];
    require_known_keys(e, {"left", "right"}, "elbows");
    c.elbows.left = detail::elbow_from_string(get_or<std::string>(e, "left", "out", "elbows"));
    c.elbows.right = detail::elbow_from_string(get_or<std::string>(e, "right", "out", "elbows"));
  }
  if (j.contains("servos")) {
    const auto& arr = j["servos"];
    if (!arr.is_array() || arr.size() != 4)
      throw Error(ErrorKind::ValidationError, "servos must be an array of exactly 4 entries");
    for (std::size_t i = 0; i < 4; ++i) c.servos[i] = detail::servo_from_json(arr[i], c.servos[i]);
  }
  c.control_rate = get_or(j, "control_rate_hz", c.control_rate, where);
  c.lead_time = get_or(j, "lead_time_s", c.lead_time, where);
  if (j.contains("transport")) {
    const auto& t = j["transport"];
    require_known_keys(t, {"device", "baud"}, "transport");
    c.transport.device = get_or(t, "device", c.transport.device, "transport");
    c.transport.baud = get_or(t, "baud", c.transport.baud, "transport");
  }
  c.port = get_or(j, "port", c.port, where);
  c.validate();
  return c;
}

inline json device_config_to_json(const DeviceConfig& c) {
  json servos = json::array();
  for (const auto& s : c.servos) {
    servos.push_back({{"channel", s.channel},
                      {"linkage", to_string(s.linkage)},
                      {"side", s.right_side ? "right" : "left"},
                      {"pulse_min_us", s.pulse_min},
                      {"pulse_max_us", s.pulse_max},
                      {"angle_min_deg", s.angle_min},
                      {"angle_max_deg", s.angle_max},
                      {"mount_offset_deg", s.mount_offset},
                      {"direction", s.direction},
                      {"stall_torque_nm", s.stall_torque}});
  }
  const auto elbow = [](Elbow e) { return e == Elbow::Out ? "out" : "in"; };
  return {{"linkage_a", detail::geometry_to_json(c.linkage_a)},
          {"linkage_b", detail::geometry_to_json(c.linkage_b)},
          {"spacer_mm", c.spacer},
          {"standoff_mm", c.standoff},
          {"hover_gap_mm", c.hover_gap},
          {"press_depth_max_mm", c.press_depth_max},
          {"contact_epsilon_mm", c.contact_epsilon},
          {"lateral_margin_mm", c.lateral_margin},
          {"singularity",
           {{"det_threshold_mm2_rad2", c.margins.det_threshold},
            {"dyad_margin_deg", c.margins.dyad_margin_deg},
            {"parallel_margin_deg", c.margins.parallel_margin_deg}}},
          {"elbows", {{"left", elbow(c.elbows.left)}, {"right", elbow(c.elbows.right)}}},
          {"servos", servos},
          {"control_rate_hz", c.control_rate},
          {"lead_time_s", c.lead_time},
          {"transport", {{"device", c.transport.device}, {"baud", c.transport.baud}}},
          {"port", c.port}};
}

inline DeviceConfig parse_device_config(std::string_view text) {
  return device_config_from_json(parse_json_text(text));
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::ValidationError, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline DeviceConfig load_device_config(const std::string& path) { return parse_device_config(read_file(path)); }

}  // namespace linkring
