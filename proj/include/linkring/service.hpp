#pragma once

// Local HTTP service for the operator console.
//
// All mutable state lives on one owner thread; HTTP handlers and the playback
// worker talk to it only through posted messages. Playback runs on its own
// worker, clocked by the schedule. Events go out on a fan-out hub consumed by
// the /events server-sent-event stream.
//
// Endpoints (JSON bodies):
//   GET  /state
//   POST /calibration        {thickness_mm, width_mm}
//   POST /pattern/play       {id, catalog?: "static" | "slippage"}
//   POST /experiment/start   {catalog, reps, seed, subject}
//   POST /experiment/answer  {trial_id, answer}
//   GET  /experiment/report  text; ?format=json for the machine-readable form
//   GET  /events             text/event-stream

#include <atomic>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "linkring/config.hpp"
#include "linkring/experiment.hpp"
#include "linkring/servo.hpp"

namespace linkring {

// Runs posted closures one at a time on a dedicated thread.
class StateOwner {
 public:
  StateOwner() : thread_([this] { run(); }) {}
  StateOwner(const StateOwner&) = delete;
  StateOwner& operator=(const StateOwner&) = delete;
  ~StateOwner() { shutdown(); }

  void post(std::function<void()> fn) {
    {
      std::lock_guard lock(mutex_);
      if (stopping_) return;
      queue_.push_back(std::move(fn));
    }
    cv_.notify_one();
  }

  // Runs `fn` on the owner thread and returns its result (or rethrows).
  // Must not be called from the owner thread itself.
  template <typename F>
  auto call(F fn) -> decltype(fn()) {
    std::packaged_task<decltype(fn())()> task(std::move(fn));
    auto result = task.get_future();
    {
      std::lock_guard lock(mutex_);
      if (stopping_) throw Error(ErrorKind::Conflict, "service is shutting down");
      queue_.push_back([&task] { task(); });
    }
    cv_.notify_one();
    return result.get();
  }

  void shutdown() {
    {
      std::lock_guard lock(mutex_);
      if (stopping_) return;
      stopping_ = true;
    }
    cv_.notify_one();
    if (thread_.joinable()) thread_.join();
  }

 private:
  void run() {
    for (;;) {
      std::function<void()> fn;
      {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
        if (queue_.empty()) return;
        fn = std::move(queue_.front());
        queue_.pop_front();
      }
      fn();
    }
  }

  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> queue_;
  bool stopping_ = false;
  std::thread thread_;
};

struct ServiceEvent {
  std::string type;
  json data;
};

class EventHub {
 public:
  class Subscription {
   public:
    explicit Subscription(EventHub& hub) : hub_(hub) {}

    // Waits up to `timeout` for the next event.
    std::optional<ServiceEvent> next(std::chrono::milliseconds timeout) {
      std::unique_lock lock(mutex_);
      cv_.wait_for(lock, timeout, [this] { return !events_.empty() || closed_; });
      if (events_.empty()) return std::nullopt;
      auto e = std::move(events_.front());
      events_.pop_front();
      return e;
    }

    bool closed() {
      std::lock_guard lock(mutex_);
      return closed_ && events_.empty();
    }

   private:
    friend class EventHub;
    void push(const ServiceEvent& e) {
      {
        std::lock_guard lock(mutex_);
        events_.push_back(e);
      }
      cv_.notify_one();
    }
    void close() {
      {
        std::lock_guard lock(mutex_);
        closed_ = true;
      }
      cv_.notify_all();
    }

    EventHub& hub_;
    std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<ServiceEvent> events_;
    bool closed_ = false;
  };

  std::shared_ptr<Subscription> subscribe() {
    auto s = std::make_shared<Subscription>(*this);
    std::lock_guard lock(mutex_);
    subs_.push_back(s);
    return s;
  }

  void unsubscribe(const std::shared_ptr<Subscription>& s) {
    std::lock_guard lock(mutex_);
    std::erase(subs_, s);
  }

  void publish(const ServiceEvent& e) {
    std::lock_guard lock(mutex_);
    for (auto& s : subs_) s->push(e);
  }

  void close_all() {
    std::lock_guard lock(mutex_);
    for (auto& s : subs_) s->close();
  }

 private:
  std::mutex mutex_;
  std::vector<std::shared_ptr<Subscription>> subs_;
};

struct ServiceOptions {
  DeviceConfig config;
  FingerProfile finger;
  bool realtime = true;  // false: playback on a virtual clock, finishing immediately
  std::string log_path;  // empty keeps the session log in memory only
  PatternCatalog static_catalog = default_static_catalog();
  PatternCatalog slippage_catalog = default_slippage_catalog();
  std::unique_ptr<Transport> transport;  // null: loopback simulation
  double event_rate = 20.0;              // Hz cap for pose events
};

class Service {
 public:
  explicit Service(ServiceOptions options) : opts_(std::move(options)) {
    opts_.config.validate();
    if (!opts_.transport) {
      opts_.transport = std::make_unique<LoopbackTransport>();
      simulated_ = true;
    }
    calibration_ = calibrate(opts_.finger, opts_.config);
    joints_ = device_targets(calibration_, opts_.config, {});
    if (!opts_.log_path.empty()) {
      std::ofstream touch(opts_.log_path, std::ios::app);
      if (!touch) throw Error(ErrorKind::ValidationError, "cannot open log '" + opts_.log_path + "'");
    }
    worker_ = std::thread([this] { playback_loop(); });
  }

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  ~Service() {
    stop();
    cancel_.store(true);
    {
      std::lock_guard lock(jobs_mutex_);
      jobs_closed_ = true;
    }
    jobs_cv_.notify_all();
    if (worker_.joinable()) worker_.join();
    owner_.shutdown();
    events_.close_all();
  }

  EventHub& events() { return events_; }

  json state() {
    return owner_.call([this] { return state_json(); });
  }

  json set_calibration(const json& body) {
    return owner_.call([this, body] {
      require_known_keys(body, {"thickness_mm", "width_mm"}, "calibration request");
      if (playback_) throw Error(ErrorKind::Conflict, "playback in progress");
      if (session_) throw Error(ErrorKind::Conflict, "experiment in progress");
      FingerProfile f;
      f.thickness = get_or(body, "thickness_mm", opts_.finger.thickness, "calibration request");
      f.width = get_or(body, "width_mm", opts_.finger.width, "calibration request");
      const auto cal = calibrate(f, opts_.config);
      const auto joints = device_targets(cal, opts_.config, {});
      opts_.finger = f;
      calibration_ = cal;
      joints_ = joints;
      return calibration_json();
    });
  }

  json play_pattern(const json& body) {
    return owner_.call([this, body] {
      require_known_keys(body, {"id", "catalog"}, "play request");
      if (session_) throw Error(ErrorKind::Conflict, "an experiment owns the device");
      if (playback_) throw Error(ErrorKind::Conflict, "playback in progress");
      const auto& catalog = catalog_named(get_or<std::string>(body, "catalog", "static", "play request"));
      if (!body.contains("id")) throw Error(ErrorKind::ValidationError, "play request needs an id");
      const int id = get_or(body, "id", 0, "play request");
      auto schedule = compile_pattern(catalog, id, opts_.config, calibration_);
      const auto ticks = schedule.entries.size();
      begin_playback(std::move(schedule), catalog.name, id, std::nullopt);
      return json{{"started", true}, {"catalog", catalog.name}, {"id", id}, {"ticks", ticks}};
    });
  }

  json start_experiment(const json& body) {
    return owner_.call([this, body] {
      require_known_keys(body, {"catalog", "reps", "seed", "subject"}, "experiment request");
      if (session_) throw Error(ErrorKind::Conflict, "an experiment is already running");
      if (playback_) throw Error(ErrorKind::Conflict, "playback in progress");
      const auto& catalog = catalog_named(get_or<std::string>(body, "catalog", "static", "experiment request"));
      const int reps = get_or(body, "reps", 5, "experiment request");
      const auto seed = get_or<std::uint64_t>(body, "seed", 1, "experiment request");
      const auto subject = get_or<std::string>(body, "subject", "subject", "experiment request");
      auto session = start_session(subject, catalog, reps, seed);
      // Every stimulus must compile before the session is committed.
      for (int id : session.pattern_ids) compile_pattern(catalog, id, opts_.config, calibration_);
      session_ = std::move(session);
      session_catalog_ = catalog;
      append_log(log_schedule_record(*session_, session_->started));
      events_.publish({"session_started", {{"subject", session_->subject_id},
                                           {"catalog", session_->catalog_id},
                                           {"trials", session_->schedule.trials.size()}}});
      deliver_next_trial();
      return session_json();
    });
  }

  json answer(const json& body) {
    return owner_.call([this, body] {
      require_known_keys(body, {"trial_id", "answer"}, "answer request");
      if (!session_) throw Error(ErrorKind::Conflict, "no experiment is running");
      if (!body.contains("trial_id") || !body.contains("answer"))
        throw Error(ErrorKind::ValidationError, "answer request needs trial_id and answer");
      const int trial_id = get_or(body, "trial_id", 0, "answer request");
      const int answer = get_or(body, "answer", 0, "answer request");
      if (!session_->find_trial(trial_id))
        throw Error(ErrorKind::UnknownTrial, "trial " + std::to_string(trial_id) + " is not scheduled");
      if (session_->responses.contains(trial_id))
        throw Error(ErrorKind::AlreadyAnswered, "trial " + std::to_string(trial_id) + " already has an answer");
      const auto current = session_->next_trial();
      if (!current || current->trial_id != trial_id)
        throw Error(ErrorKind::Conflict, "trial " + std::to_string(trial_id) + " is not the current trial");
      if (playback_) throw Error(ErrorKind::Conflict, "stimulus for trial " + std::to_string(trial_id) +
                                                          " is still playing");
      auto updated = record_response(*session_, trial_id, answer);
      *session_ = std::move(updated);
      append_log(log_response_record(*session_, trial_id));
      events_.publish({"answer_recorded", {{"trial_id", trial_id}, {"answer", answer}}});
      json out = {{"accepted", true}, {"trial_id", trial_id}};
      if (session_->complete()) {
        events_.publish({"session_complete", {{"subject", session_->subject_id}}});
        session_.reset();
        out["session_complete"] = true;
      } else {
        out["session_complete"] = false;
        deliver_next_trial();
      }
      return out;
    });
  }

  // Same analysis path as the CLI `report` command, over the service's log.
  AnalysisReport report() {
    const std::string log = owner_.call([this] { return log_text(); });
    return analyze(parse_session_log(log));
  }

  // Blocks until no playback is active or the timeout expires.
  bool wait_idle(std::chrono::milliseconds timeout = std::chrono::seconds(30)) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (std::chrono::steady_clock::now() < deadline) {
      if (!owner_.call([this] { return playback_.has_value(); })) return true;
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
    return false;
  }

  // Binds the HTTP routes; returns the bound port (0 on failure).
  int bind(const std::string& host, int port) {
    install_routes();
    if (port == 0) return server_.bind_to_any_port(host);
    return server_.bind_to_port(host, port) ? port : 0;
  }
  void listen_after_bind() { server_.listen_after_bind(); }
  void stop() {
    events_.close_all();
    server_.stop();
  }
  bool running() const { return server_.is_running(); }

 private:
  struct ActivePlayback {
    std::string catalog;
    int pattern_id = 0;
    std::optional<int> trial_id;
    std::size_t ticks = 0;
  };

  struct Job {
    JointSchedule schedule;
    std::optional<int> trial_id;
  };

  const PatternCatalog& catalog_named(const std::string& name) const {
    if (name == opts_.static_catalog.name || name == "static") return opts_.static_catalog;
    if (name == opts_.slippage_catalog.name || name == "slippage") return opts_.slippage_catalog;
    throw Error(ErrorKind::ValidationError, "unknown catalog '" + name + "'");
  }

  // Owner thread only.
  void begin_playback(JointSchedule schedule, const std::string& catalog, int id, std::optional<int> trial) {
    playback_ = ActivePlayback{catalog, id, trial, schedule.entries.size()};
    events_.publish({"playback_started", {{"catalog", catalog}, {"id", id}, {"ticks", schedule.entries.size()}}});
    {
      std::lock_guard lock(jobs_mutex_);
      jobs_.push_back({std::move(schedule), trial});
    }
    jobs_cv_.notify_one();
  }

  // Owner thread only.
  void deliver_next_trial() {
    const auto trial = session_->next_trial();
    if (!trial) return;
    events_.publish({"trial_started", {{"trial_id", trial->trial_id}}});
    begin_playback(compile_pattern(session_catalog_, trial->pattern_id, opts_.config, calibration_),
                   session_catalog_.name, trial->pattern_id, trial->trial_id);
  }

  // Owner thread only.
  void finish_playback(const PlaybackReport& report) {
    if (!playback_) return;
    frames_total_ += report.frames_sent;
    const auto done = *playback_;
    playback_.reset();
    last_report_ = report;
    events_.publish({"playback_finished",
                     {{"frames_sent", report.frames_sent},
                      {"underruns", report.underruns},
                      {"error", report.error ? json(*report.error) : json(nullptr)}}});
    if (done.trial_id && session_) {
      if (const Trial* t = session_->find_trial(*done.trial_id)) {
        append_log(log_stimulus_record(*session_, *t));
        events_.publish({"stimulus_delivered", {{"trial_id", t->trial_id}}});
      }
    }
  }

  void playback_loop() {
    for (;;) {
      Job job;
      {
        std::unique_lock lock(jobs_mutex_);
        jobs_cv_.wait(lock, [this] { return jobs_closed_ || !jobs_.empty(); });
        if (jobs_.empty()) return;
        job = std::move(jobs_.front());
        jobs_.pop_front();
      }
      VirtualClock virtual_clock;
      PlaybackOptions po;
      if (!opts_.realtime) po.clock = &virtual_clock;
      po.cancel = &cancel_;
      const double min_gap = 1.0 / opts_.event_rate;
      double last_event = -1e300;
      po.on_tick = [&](const TickEvent& tick) {
        const bool final_tick = tick.index + 1 == tick.total;
        owner_.post([this, alpha = tick.alpha] {
          joints_[0] = {alpha[0], alpha[1]};
          joints_[1] = {alpha[2], alpha[3]};
        });
        if (tick.t - last_event >= min_gap - 1e-9 || final_tick) {
          last_event = tick.t;
          events_.publish({"pose", {{"t", tick.t}, {"phase", to_string(tick.phase)}, {"alpha_deg", tick.alpha}}});
        }
      };
      PlaybackReport report;
      try {
        report = play(job.schedule, opts_.config.servos, *opts_.transport, opts_.config.control_rate, po);
      } catch (const Error& e) {
        report.error = e.what();
      }
      if (simulated_) static_cast<LoopbackTransport&>(*opts_.transport).clear();
      owner_.post([this, report] { finish_playback(report); });
    }
  }

  void append_log(const std::string& record) {
    log_buffer_ += record;
    if (!opts_.log_path.empty()) {
      std::ofstream out(opts_.log_path, std::ios::app | std::ios::binary);
      out << record;
      out.flush();
    }
  }

  std::string log_text() const { return opts_.log_path.empty() ? log_buffer_ : read_file(opts_.log_path); }

  json calibration_json() const {
    return {{"contact_depth_mm", calibration_.contact_depth},
            {"lateral_range_mm", calibration_.lateral_range},
            {"press_depth_max_mm", calibration_.press_depth_max},
            {"finger", {{"thickness_mm", opts_.finger.thickness}, {"width_mm", opts_.finger.width}}}};
  }

  json session_json() const {
    if (!session_) return nullptr;
    const auto next = session_->next_trial();
    return {{"subject", session_->subject_id},
            {"catalog", session_->catalog_id},
            {"trials", session_->schedule.trials.size()},
            {"answered", session_->responses.size()},
            {"current_trial", next ? json(next->trial_id) : json(nullptr)},
            {"awaiting_answer", next.has_value() && !playback_.has_value()}};
  }

  json state_json() const {
    json effectors = json::array();
    for (Effector e : {Effector::A, Effector::B}) {
      const auto& q = joints_[static_cast<std::size_t>(e)];
      json item = {{"id", to_string(e)}, {"alpha_left_deg", q.left}, {"alpha_right_deg", q.right}};
      try {
        const auto pose = forward_kinematics(opts_.config.linkage(e), q);
        item["x_mm"] = pose.x;
        item["y_mm"] = pose.y;
        item["contact"] = to_string(contact_state(calibration_, pose, opts_.config.contact_epsilon));
      } catch (const Error& err) {
        item["x_mm"] = nullptr;
        item["y_mm"] = nullptr;
        item["contact"] = std::string(err.name());
      }
      effectors.push_back(item);
    }
    json playback = {{"active", playback_.has_value()}, {"frames_sent_total", frames_total_}};
    if (playback_) {
      playback["catalog"] = playback_->catalog;
      playback["id"] = playback_->pattern_id;
      playback["ticks"] = playback_->ticks;
    }
    return {{"mode", simulated_ ? "simulation" : "hardware"},
            {"calibration", calibration_json()},
            {"effectors", effectors},
            {"playback", playback},
            {"session", session_json()}};
  }

  static int status_for(ErrorKind k) {
    switch (k) {
      case ErrorKind::Conflict:
      case ErrorKind::AlreadyAnswered: return 409;
      default: return 422;
    }
  }

  template <typename F>
  static void respond(httplib::Response& res, F&& fn) {
    try {
      res.set_content(fn().dump(), "application/json");
    } catch (const Error& e) {
      res.status = e.kind() == ErrorKind::ParseError ? 400 : status_for(e.kind());
      res.set_content(json{{"error", e.name()}, {"message", e.what()}}.dump(), "application/json");
    }
  }

  static json body_of(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    return parse_json_text(req.body);
  }

  void install_routes() {
    server_.Get("/state", [this](const httplib::Request&, httplib::Response& res) {
      respond(res, [&] { return state(); });
    });
    server_.Post("/calibration", [this](const httplib::Request& req, httplib::Response& res) {
      respond(res, [&] { return set_calibration(body_of(req)); });
    });
    server_.Post("/pattern/play", [this](const httplib::Request& req, httplib::Response& res) {
      respond(res, [&] { return play_pattern(body_of(req)); });
    });
    server_.Post("/experiment/start", [this](const httplib::Request& req, httplib::Response& res) {
      respond(res, [&] { return start_experiment(body_of(req)); });
    });
    server_.Post("/experiment/answer", [this](const httplib::Request& req, httplib::Response& res) {
      respond(res, [&] { return answer(body_of(req)); });
    });
    server_.Get("/experiment/report", [this](const httplib::Request& req, httplib::Response& res) {
      try {
        const auto r = report();
        if (req.get_param_value("format") == "json")
          res.set_content(report_to_json(r).dump(), "application/json");
        else
          res.set_content(render_report_text(r), "text/plain");
      } catch (const Error& e) {
        res.status = status_for(e.kind());
        res.set_content(json{{"error", e.name()}, {"message", e.what()}}.dump(), "application/json");
      }
    });
    server_.Get("/events", [this](const httplib::Request&, httplib::Response& res) {
      auto sub = events_.subscribe();
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider(
          "text/event-stream",
          [sub](std::size_t, httplib::DataSink& sink) {
            auto e = sub->next(std::chrono::milliseconds(500));
            if (!e && sub->closed()) {
              sink.done();
              return true;
            }
            std::string chunk = e ? "event: " + e->type + "\ndata: " + e->data.dump() + "\n\n" : ": keepalive\n\n";
            return sink.write(chunk.data(), chunk.size());
          },
          [this, sub](bool) { events_.unsubscribe(sub); });
    });
  }

  ServiceOptions opts_;
  bool simulated_ = false;

  // Owned by the state owner thread.
  DeviceCalibration calibration_;
  std::array<JointAngles, 2> joints_{};
  std::optional<ActivePlayback> playback_;
  std::optional<TrialSession> session_;
  PatternCatalog session_catalog_;
  std::size_t frames_total_ = 0;
  std::optional<PlaybackReport> last_report_;
  std::string log_buffer_;

  EventHub events_;
  std::atomic<bool> cancel_{false};
  std::mutex jobs_mutex_;
  std::condition_variable jobs_cv_;
  std::deque<Job> jobs_;
  bool jobs_closed_ = false;
  std::thread worker_;
  httplib::Server server_;
  StateOwner owner_;  // declared last so it starts after every field it touches
};

}  // namespace linkring
