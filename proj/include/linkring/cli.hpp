#pragma once

// Command-line front end. `run_cli` is the whole program minus process
// plumbing so tests can drive it with string streams.
//
// Exit codes: 0 success, 1 domain error, 2 usage error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "linkring/config.hpp"
#include "linkring/experiment.hpp"
#include "linkring/service.hpp"

namespace linkring {

namespace detail {

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline const char* cell_name(CellClass c) {
  switch (c) {
    case CellClass::Reachable: return "reachable";
    case CellClass::NearSingular: return "near_singular";
    case CellClass::Unreachable: return "unreachable";
  }
  return "?";
}

inline Effector effector_from(const std::string& s) {
  if (s == "A" || s == "a") return Effector::A;
  if (s == "B" || s == "b") return Effector::B;
  throw Error(ErrorKind::ValidationError, "unknown effector '" + s + "'");
}

// "static" and "slippage" name the built-in catalogs; anything else is a file.
inline PatternCatalog catalog_arg(const std::string& s) {
  if (s == "static") return default_static_catalog();
  if (s == "slippage") return default_slippage_catalog();
  return load_catalog(read_file(s));
}

inline void write_workspace_csv(const WorkspaceMap& map, std::ostream& out) {
  out << "x_mm,y_mm,class\n";
  for (std::size_t j = 0; j < map.ny; ++j)
    for (std::size_t i = 0; i < map.nx; ++i) {
      const Vec2 c = map.center(i, j);
      out << fixed(c.x, 4) << ',' << fixed(c.y, 4) << ',' << cell_name(map.at(i, j)) << '\n';
    }
}

// Plain PGM, top row at y_max. Reachable 255, near-singular 128, unreachable 0.
inline void write_workspace_pgm(const WorkspaceMap& map, std::ostream& out) {
  out << "P2\n" << map.nx << ' ' << map.ny << "\n255\n";
  for (std::size_t r = 0; r < map.ny; ++r) {
    const std::size_t j = map.ny - 1 - r;
    for (std::size_t i = 0; i < map.nx; ++i) {
      const auto c = map.at(i, j);
      out << (c == CellClass::Reachable ? 255 : c == CellClass::NearSingular ? 128 : 0)
          << (i + 1 == map.nx ? '\n' : ' ');
    }
  }
}

inline std::unique_ptr<Transport> open_transport(bool simulate, const DeviceConfig& cfg) {
  if (simulate) return std::make_unique<LoopbackTransport>();
  if (cfg.transport.device.empty())
    throw Error(ErrorKind::TransportError, "hardware mode needs transport.device in the config");
  return std::make_unique<SerialTransport>(cfg.transport.device, cfg.transport.baud);
}

}  // namespace detail

inline int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"linkring: finger-worn linkage display toolkit", "linkring"};
  app.require_subcommand(1);

  std::string config_path;
  bool simulate = true;
  int port = -1;
  std::optional<std::uint64_t> seed;
  FingerProfile finger;
  app.add_option("--config", config_path, "device config JSON")->check(CLI::ExistingFile);
  app.add_flag("--simulate,!--no-simulate", simulate, "loopback transport instead of the serial device");
  app.add_option("--port", port, "service port");
  app.add_option("--seed", seed, "trial schedule seed");
  app.add_option("--thickness", finger.thickness, "finger thickness, mm");
  app.add_option("--width", finger.width, "finger width, mm");

  auto* ws = app.add_subcommand("workspace", "classify a grid of effector targets");
  std::string ws_format = "csv", ws_output, ws_effector = "A";
  double ws_resolution = 0.5;
  std::vector<double> ws_bounds{-60.0, 60.0, -60.0, 10.0};
  ws->add_option("--format", ws_format)->check(CLI::IsMember({"csv", "pgm"}));
  ws->add_option("--resolution", ws_resolution, "cell size, mm");
  ws->add_option("--bounds", ws_bounds, "x_min x_max y_min y_max, mm")->expected(4);
  ws->add_option("--effector", ws_effector);
  ws->add_option("-o,--output", ws_output, "file instead of stdout");

  auto* ik = app.add_subcommand("ik", "joint angles for an effector target");
  double ik_x = 0.0, ik_y = 0.0;
  std::string ik_effector = "A";
  ik->add_option("x", ik_x, "mm")->required();
  ik->add_option("y", ik_y, "mm, negative toward the finger")->required();
  ik->add_option("--effector", ik_effector);

  auto* force = app.add_subcommand("force", "normal force at the symmetric contact pose");
  std::optional<double> force_depth, force_torque;
  std::string force_effector = "A";
  force->add_option("--depth", force_depth, "contact depth H, mm (default: calibrated)");
  force->add_option("--torque", force_torque, "motor torque, N m (default: servo stall torque)");
  force->add_option("--effector", force_effector);

  auto* pattern = app.add_subcommand("pattern", "pattern operations");
  pattern->require_subcommand(1);
  auto* play_cmd = pattern->add_subcommand("play", "stream one pattern to the device");
  int play_id = 0;
  std::string play_catalog = "static";
  bool play_realtime = false, play_wire = false;
  play_cmd->add_option("id", play_id)->required();
  play_cmd->add_option("--catalog", play_catalog, "static, slippage, or a catalog file");
  play_cmd->add_flag("--realtime", play_realtime, "pace by the wall clock in simulation");
  play_cmd->add_flag("--wire", play_wire, "print the transmitted bytes (simulation only)");

  auto* experiment = app.add_subcommand("experiment", "recognition experiments");
  experiment->require_subcommand(1);
  auto* run_cmd = experiment->add_subcommand("run", "interactive session; answers read from stdin");
  std::string run_catalog = "static", run_subject = "subject", run_log;
  int run_reps = 5;
  bool run_fast = false;
  run_cmd->add_option("--catalog", run_catalog);
  run_cmd->add_option("--reps", run_reps);
  run_cmd->add_option("--subject", run_subject);
  run_cmd->add_option("--log", run_log, "append session records here")->required();
  run_cmd->add_flag("--fast", run_fast, "virtual clock: do not wait for stimuli to play out");

  auto* report_cmd = app.add_subcommand("report", "analyze a session log");
  std::string report_log;
  bool report_json = false;
  report_cmd->add_option("log", report_log)->required()->check(CLI::ExistingFile);
  report_cmd->add_flag("--json", report_json);

  auto* serve = app.add_subcommand("serve", "run the local HTTP service");
  std::string serve_host = "127.0.0.1", serve_log;
  serve->add_option("--host", serve_host);
  serve->add_option("--log", serve_log, "session log file");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    DeviceConfig cfg = config_path.empty() ? DeviceConfig{} : load_device_config(config_path);
    if (port >= 0) cfg.port = port;
    cfg.validate();
    const auto calibration = [&] { return calibrate(finger, cfg); };

    if (*ws) {
      const Bounds b{ws_bounds[0], ws_bounds[1], ws_bounds[2], ws_bounds[3]};
      const auto map =
          workspace_grid(cfg.linkage(detail::effector_from(ws_effector)), b, ws_resolution, cfg.elbows, cfg.margins);
      std::ofstream file;
      if (!ws_output.empty()) {
        file.open(ws_output, std::ios::binary);
        if (!file) throw Error(ErrorKind::ValidationError, "cannot write '" + ws_output + "'");
      }
      std::ostream& dst = ws_output.empty() ? out : file;
      if (ws_format == "csv")
        detail::write_workspace_csv(map, dst);
      else
        detail::write_workspace_pgm(map, dst);
      if (!ws_output.empty())
        out << map.count(CellClass::Reachable) << " reachable of " << map.cells.size() << " cells\n";
      return 0;
    }

    if (*ik) {
      JointAngles q;
      try {
        q = inverse_kinematics(cfg.linkage(detail::effector_from(ik_effector)), {ik_x, ik_y}, cfg.elbows,
                               cfg.margins);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Unreachable) throw;
        err << "unreachable: (" << ik_x << ", " << ik_y << ") is outside the workspace\n";
        return 1;
      }
      out << "alpha_left=" << detail::fixed(q.left, 1) << " alpha_right=" << detail::fixed(q.right, 1) << "\n";
      return 0;
    }

    if (*force) {
      const Effector e = detail::effector_from(force_effector);
      const double depth = force_depth ? *force_depth : calibration().contact_depth;
      double torque = force_torque.value_or(0.0);
      if (!force_torque)
        for (const auto& s : cfg.servos)
          if (s.linkage == e) torque = s.stall_torque;
      const auto f = symmetric_normal_force(cfg.linkage(e), depth, torque, cfg.margins);
      out << "H=" << detail::fixed(depth, 2) << " mm tau=" << detail::fixed(torque, 4) << " N m\n";
      out << "alpha=" << detail::fixed(f.alpha, 1) << " beta=" << detail::fixed(f.beta, 1)
          << " gamma=" << detail::fixed(f.gamma, 1) << " phi=" << detail::fixed(f.phi, 1) << " deg\n";
      out << "F1=" << detail::fixed(f.input_force, 3) << " N F2=" << detail::fixed(f.output_link_force, 3) << " N\n";
      out << "Fn=" << detail::fixed(f.normal_force, 2) << " N\n";
      return 0;
    }

    if (*play_cmd) {
      const auto catalog = detail::catalog_arg(play_catalog);
      const auto schedule = compile_pattern(catalog, play_id, cfg, calibration());
      auto transport = detail::open_transport(simulate, cfg);
      VirtualClock virtual_clock;
      PlaybackOptions po;
      if (simulate && !play_realtime) po.clock = &virtual_clock;
      const auto report = play(schedule, cfg.servos, *transport, cfg.control_rate, po);
      if (play_wire && simulate) {
        out << static_cast<LoopbackTransport&>(*transport).captured();
      } else {
        out << catalog.name << " pattern " << play_id << ": " << schedule.entries.size() << " ticks, "
            << report.frames_sent << " frames, " << detail::fixed(report.duration, 3) << " s, " << report.underruns
            << " underruns\n";
      }
      if (report.error) {
        err << "error: " << *report.error << "\n";
        return 1;
      }
      return 0;
    }

    if (*run_cmd) {
      const auto catalog = detail::catalog_arg(run_catalog);
      const auto cal = calibration();
      const std::uint64_t s = seed ? *seed : (std::uint64_t{std::random_device{}()} << 32) ^ std::random_device{}();
      auto session = start_session(run_subject, catalog, run_reps, s);
      std::vector<JointSchedule> stimuli;
      for (int id : session.pattern_ids) stimuli.push_back(compile_pattern(catalog, id, cfg, cal));

      std::ofstream log(run_log, std::ios::app | std::ios::binary);
      if (!log) throw Error(ErrorKind::ValidationError, "cannot open log '" + run_log + "'");
      const auto append = [&](const std::string& record) {
        log << record;
        log.flush();
      };
      append(log_schedule_record(session, session.started));
      auto transport = detail::open_transport(simulate, cfg);
      out << "session " << session.subject_id << ": " << session.schedule.trials.size() << " trials, seed " << s
          << "\n";

      const auto trials = session.schedule.trials;
      for (const auto& trial : trials) {
        VirtualClock virtual_clock;
        PlaybackOptions po;
        if (run_fast) po.clock = &virtual_clock;
        const auto idx = static_cast<std::size_t>(
            std::find(session.pattern_ids.begin(), session.pattern_ids.end(), trial.pattern_id) -
            session.pattern_ids.begin());
        const auto rep = play(stimuli[idx], cfg.servos, *transport, cfg.control_rate, po);
        if (rep.error) throw Error(ErrorKind::TransportError, *rep.error);
        if (simulate) static_cast<LoopbackTransport&>(*transport).clear();
        append(log_stimulus_record(session, trial));

        for (;;) {
          out << "trial " << trial.trial_id << "/" << session.schedule.trials.size() << " answer: " << std::flush;
          std::string line;
          if (!std::getline(in, line)) {
            err << "input ended after " << session.responses.size() << " answers; log kept at " << run_log << "\n";
            return 1;
          }
          try {
            std::size_t used = 0;
            const int answer = std::stoi(line, &used);
            if (line.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(line);
            auto updated = record_response(session, trial.trial_id, answer);
            session = std::move(updated);
            append(log_response_record(session, trial.trial_id));
            break;
          } catch (const Error& e) {
            err << e.what() << "\n";
          } catch (const std::logic_error&) {
            err << "enter a pattern number\n";
          }
        }
      }
      out << render_report_text(analyze({session}));
      return 0;
    }

    if (*report_cmd) {
      const auto r = analyze(parse_session_log(read_file(report_log)));
      if (report_json)
        out << report_to_json(r).dump(2) << "\n";
      else
        out << render_report_text(r);
      return 0;
    }

    if (*serve) {
      ServiceOptions so;
      so.config = cfg;
      so.finger = finger;
      so.realtime = true;
      so.log_path = serve_log;
      so.transport = simulate ? nullptr : detail::open_transport(false, cfg);
      Service service(std::move(so));
      const int bound = service.bind(serve_host, cfg.port);
      if (bound <= 0) {
        err << "cannot bind " << serve_host << ":" << cfg.port << "\n";
        return 1;
      }
      out << "listening on http://" << serve_host << ":" << bound << (simulate ? " (simulation)" : "") << "\n"
          << std::flush;
      service.listen_after_bind();
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace linkring
