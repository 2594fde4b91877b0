#pragma once

// Servo command layer: pulse mapping, the ASCII wire protocol, byte
// transports, and fixed-rate playback of joint schedules.
//
// Wire protocol, one command per line:
//   P <channel> <pulse_us>\n   set one servo pulse width
//   H\n                        home all servos
//   S\n                        stop / relax all servos

#include <fcntl.h>
#include <termios.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <atomic>
#include <cerrno>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <variant>
#include <vector>

#include "linkring/device.hpp"
#include "linkring/patterns.hpp"
#include "linkring/servo_spec.hpp"

namespace linkring {

inline constexpr int kChannelCount = 4;
inline constexpr int kWirePulseMin = 500;   // us
inline constexpr int kWirePulseMax = 2500;  // us

struct PulseCommand {
  int channel = 0;
  int pulse = 0;
  friend bool operator==(const PulseCommand&, const PulseCommand&) = default;
};
struct HomeCommand {
  friend bool operator==(const HomeCommand&, const HomeCommand&) = default;
};
struct StopCommand {
  friend bool operator==(const StopCommand&, const StopCommand&) = default;
};
using WireCommand = std::variant<PulseCommand, HomeCommand, StopCommand>;

inline std::string encode_frame(int channel, int pulse) {
  if (channel < 0 || channel >= kChannelCount)
    throw Error(ErrorKind::InvalidChannel, "channel " + std::to_string(channel) + " outside 0-3");
  if (pulse < kWirePulseMin || pulse > kWirePulseMax)
    throw Error(ErrorKind::PulseOutOfRange, "pulse " + std::to_string(pulse) + " us outside [" +
                                                std::to_string(kWirePulseMin) + ", " +
                                                std::to_string(kWirePulseMax) + "]");
  return "P " + std::to_string(channel) + " " + std::to_string(pulse) + "\n";
}

inline std::string encode_home() { return "H\n"; }
inline std::string encode_stop() { return "S\n"; }

// Parses exactly one newline-terminated command.
inline WireCommand decode_frame(std::string_view line) {
  const std::string_view original = line;
  const auto bad = [&] { return Error(ErrorKind::ParseError, "malformed frame '" + std::string(original) + "'"); };
  if (line.empty() || line.back() != '\n') throw bad();
  line.remove_suffix(1);
  if (line == "H") return HomeCommand{};
  if (line == "S") return StopCommand{};
  if (line.size() < 5 || line.substr(0, 2) != "P ") throw bad();
  line.remove_prefix(2);
  const auto space = line.find(' ');
  if (space == std::string_view::npos) throw bad();
  const auto parse_int = [&](std::string_view s) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty() || s.front() == '-' || s.front() == '+')
      throw bad();
    return v;
  };
  PulseCommand cmd{parse_int(line.substr(0, space)), parse_int(line.substr(space + 1))};
  // Re-encoding validates the ranges and rejects non-canonical spellings.
  if (encode_frame(cmd.channel, cmd.pulse) != original) throw bad();
  return cmd;
}

// Splits a byte stream into complete commands; a trailing partial line is an error.
inline std::vector<WireCommand> decode_stream(std::string_view bytes) {
  std::vector<WireCommand> out;
  while (!bytes.empty()) {
    const auto nl = bytes.find('\n');
    if (nl == std::string_view::npos) throw Error(ErrorKind::ParseError, "truncated frame at end of stream");
    out.push_back(decode_frame(bytes.substr(0, nl + 1)));
    bytes.remove_prefix(nl + 1);
  }
  return out;
}

class Transport {
 public:
  virtual ~Transport() = default;
  virtual bool is_open() const = 0;
  // Writes all bytes or throws TransportError.
  virtual void write(std::string_view bytes) = 0;
};

// In-memory transport capturing every byte written.
class LoopbackTransport final : public Transport {
 public:
  bool is_open() const override { return open_; }

  void write(std::string_view bytes) override {
    if (!open_) throw Error(ErrorKind::TransportError, "loopback transport is closed");
    if (fail_after_ && writes_ >= *fail_after_) throw Error(ErrorKind::TransportError, "injected write failure");
    ++writes_;
    captured_.append(bytes);
  }

  void close() { open_ = false; }
  // Makes every write after the first `n` fail.
  void fail_after(std::size_t n) { fail_after_ = n; }

  const std::string& captured() const { return captured_; }
  std::size_t writes() const { return writes_; }
  void clear() {
    captured_.clear();
    writes_ = 0;
  }

 private:
  bool open_ = true;
  std::optional<std::size_t> fail_after_;
  std::size_t writes_ = 0;
  std::string captured_;
};

// POSIX serial device in raw 8N1 mode.
class SerialTransport final : public Transport {
 public:
  SerialTransport(const std::string& path, int baud) {
    const speed_t speed = baud_constant(baud);
    fd_ = ::open(path.c_str(), O_RDWR | O_NOCTTY);
    if (fd_ < 0) throw Error(ErrorKind::TransportError, "cannot open '" + path + "': " + std::strerror(errno));
    termios tio{};
    if (::tcgetattr(fd_, &tio) != 0) {
      const std::string msg = std::strerror(errno);
      ::close(fd_);
      throw Error(ErrorKind::TransportError, "tcgetattr on '" + path + "': " + msg);
    }
    ::cfmakeraw(&tio);
    ::cfsetispeed(&tio, speed);
    ::cfsetospeed(&tio, speed);
    tio.c_cflag |= CLOCAL | CREAD;
    if (::tcsetattr(fd_, TCSANOW, &tio) != 0) {
      const std::string msg = std::strerror(errno);
      ::close(fd_);
      throw Error(ErrorKind::TransportError, "tcsetattr on '" + path + "': " + msg);
    }
  }

  SerialTransport(const SerialTransport&) = delete;
  SerialTransport& operator=(const SerialTransport&) = delete;
  ~SerialTransport() override {
    if (fd_ >= 0) ::close(fd_);
  }

  bool is_open() const override { return fd_ >= 0; }

  void write(std::string_view bytes) override {
    while (!bytes.empty()) {
      const ssize_t n = ::write(fd_, bytes.data(), bytes.size());
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error(ErrorKind::TransportError, std::string("serial write: ") + std::strerror(errno));
      }
      bytes.remove_prefix(static_cast<std::size_t>(n));
    }
  }

  static speed_t baud_constant(int baud) {
    switch (baud) {
      case 9600: return B9600;
      case 19200: return B19200;
      case 38400: return B38400;
      case 57600: return B57600;
      case 115200: return B115200;
      case 230400: return B230400;
      default: throw Error(ErrorKind::TransportError, "unsupported baud rate " + std::to_string(baud));
    }
  }

 private:
  int fd_ = -1;
};

class Clock {
 public:
  virtual ~Clock() = default;
  virtual double now() = 0;  // s
  virtual void sleep_until(double t) = 0;
};

class SteadyClock final : public Clock {
 public:
  double now() override {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
  }
  void sleep_until(double t) override {
    const double dt = t - now();
    if (dt > 0.0) std::this_thread::sleep_for(std::chrono::duration<double>(dt));
  }
};

// Deterministic clock: sleeping advances time exactly to the deadline plus an
// optional per-call delay used to simulate late ticks.
class VirtualClock final : public Clock {
 public:
  double now() override { return now_; }
  void sleep_until(double t) override {
    now_ = std::max(now_, t);
    if (delay_) now_ += delay_(calls_);
    ++calls_;
  }
  void set_delay(std::function<double(std::size_t)> delay) { delay_ = std::move(delay); }

 private:
  double now_ = 0.0;
  std::size_t calls_ = 0;
  std::function<double(std::size_t)> delay_;
};

struct PlaybackReport {
  std::size_t frames_sent = 0;
  double duration = 0.0;    // s
  double max_jitter = 0.0;  // s
  std::size_t underruns = 0;
  bool cancelled = false;
  std::optional<std::string> error;  // set when the transport failed mid-stream
};

struct TickEvent {
  std::size_t index = 0;
  std::size_t total = 0;
  double t = 0.0;
  Phase phase = Phase::Stimulus;
  std::array<double, 4> alpha{};
  std::array<int, 4> pulses{};  // by channel
};

struct PlaybackOptions {
  Clock* clock = nullptr;  // defaults to a SteadyClock
  const std::atomic<bool>* cancel = nullptr;
  std::function<void(const TickEvent&)> on_tick;
};

// Pulse widths by channel for every schedule entry; throws AngleOutOfRange.
inline std::vector<std::array<int, 4>> schedule_pulses(const JointSchedule& schedule,
                                                       const std::array<ServoSpec, 4>& specs) {
  std::array<const ServoSpec*, 4> by_channel{};
  for (const auto& s : specs) {
    if (s.channel < 0 || s.channel >= kChannelCount)
      throw Error(ErrorKind::InvalidChannel, "servo channel " + std::to_string(s.channel));
    by_channel[static_cast<std::size_t>(s.channel)] = &s;
  }
  for (const auto* s : by_channel)
    if (!s) throw Error(ErrorKind::InvalidChannel, "servo map does not cover channels 0-3");
  std::vector<std::array<int, 4>> out;
  out.reserve(schedule.entries.size());
  for (const auto& e : schedule.entries) {
    std::array<int, 4> p{};
    for (std::size_t c = 0; c < 4; ++c) {
      const ServoSpec& s = *by_channel[c];
      const Side side = s.right_side ? Side::Right : Side::Left;
      p[c] = angle_to_pulse(s, e.alpha[motor_index(s.linkage, side)]);
      if (p[c] < kWirePulseMin || p[c] > kWirePulseMax)
        throw Error(ErrorKind::PulseOutOfRange, "channel " + std::to_string(c) + " pulse " + std::to_string(p[c]));
    }
    out.push_back(p);
  }
  return out;
}

// Streams the schedule, four frames per tick in one write so a tick is never
// split. Every entry is mapped to pulses before the first byte goes out.
inline PlaybackReport play(const JointSchedule& schedule, const std::array<ServoSpec, 4>& specs, Transport& transport,
                           double rate, const PlaybackOptions& options = {}) {
  if (!(rate > 0.0)) throw Error(ErrorKind::ValidationError, "playback rate must be positive");
  if (!transport.is_open()) throw Error(ErrorKind::TransportError, "transport is not open");
  const auto pulses = schedule_pulses(schedule, specs);

  SteadyClock steady;
  Clock& clock = options.clock ? *options.clock : steady;
  PlaybackReport report;
  if (schedule.entries.empty()) return report;

  const double period = 1.0 / rate;
  const double start = clock.now();
  const double t0 = schedule.entries.front().t;
  std::string buffer;
  for (std::size_t i = 0; i < schedule.entries.size(); ++i) {
    if (options.cancel && options.cancel->load()) {
      report.cancelled = true;
      break;
    }
    const auto& entry = schedule.entries[i];
    const double ideal = start + (entry.t - t0);
    clock.sleep_until(ideal);
    const double late = clock.now() - ideal;
    report.max_jitter = std::max(report.max_jitter, std::abs(late));
    if (late > period) ++report.underruns;

    buffer.clear();
    for (int c = 0; c < kChannelCount; ++c) buffer += encode_frame(c, pulses[i][static_cast<std::size_t>(c)]);
    try {
      transport.write(buffer);
    } catch (const Error& e) {
      report.error = e.what();
      break;
    }
    report.frames_sent += kChannelCount;
    if (options.on_tick) options.on_tick({i, schedule.entries.size(), entry.t, entry.phase, entry.alpha, pulses[i]});
  }
  report.duration = clock.now() - start;
  return report;
}

}  // namespace linkring
