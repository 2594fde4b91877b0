#pragma once

// Pattern identification experiments: seeded trial schedules, response
// capture, the append-only session log, and the analysis report (confusion
// matrix, recognition rates, one-way ANOVA over per-subject accuracy).

#include <time.h>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "linkring/error.hpp"
#include "linkring/json_util.hpp"
#include "linkring/patterns.hpp"
#include "linkring/stats.hpp"

namespace linkring {

// SplitMix64 (Steele, Lea, Flood 2014): 64-bit state, one add + mix per draw,
// identical output on every platform. split() derives an independent stream.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  SplitMix64 split() { return SplitMix64(next()); }

  // Unbiased integer in [0, bound) by Lemire's multiply-and-reject.
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) return 0;
    unsigned __int128 m = static_cast<unsigned __int128>(next()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(next()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

 private:
  std::uint64_t state_;
};

struct Trial {
  int trial_id = 0;
  int pattern_id = 0;
  friend bool operator==(const Trial&, const Trial&) = default;
};

struct TrialSchedule {
  std::vector<Trial> trials;
  std::uint64_t seed = 0;
  int repetitions = 1;
  friend bool operator==(const TrialSchedule&, const TrialSchedule&) = default;
};

// Each id `repetitions` times, Fisher-Yates shuffled by SplitMix64(seed).
inline TrialSchedule build_schedule(std::vector<int> pattern_ids, int repetitions, std::uint64_t seed) {
  if (pattern_ids.empty()) throw Error(ErrorKind::EmptyCatalog, "catalog has no patterns");
  if (repetitions < 1) throw Error(ErrorKind::ValidationError, "repetitions must be >= 1");
  std::sort(pattern_ids.begin(), pattern_ids.end());
  std::vector<int> order;
  order.reserve(pattern_ids.size() * static_cast<std::size_t>(repetitions));
  for (int id : pattern_ids)
    for (int r = 0; r < repetitions; ++r) order.push_back(id);
  SplitMix64 rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  TrialSchedule s;
  s.seed = seed;
  s.repetitions = repetitions;
  for (std::size_t i = 0; i < order.size(); ++i) s.trials.push_back({static_cast<int>(i) + 1, order[i]});
  return s;
}

inline TrialSchedule build_schedule(const PatternCatalog& catalog, int repetitions, std::uint64_t seed) {
  return build_schedule(catalog.ids(), repetitions, seed);
}

struct Response {
  int answer = 0;
  std::string timestamp;
  friend bool operator==(const Response&, const Response&) = default;
};

struct TrialSession {
  std::string subject_id;
  std::string catalog_id;
  std::vector<int> pattern_ids;  // valid answers
  TrialSchedule schedule;
  std::map<int, Response> responses;  // by trial id
  std::string started;

  bool complete() const { return responses.size() == schedule.trials.size(); }

  const Trial* find_trial(int trial_id) const {
    if (trial_id < 1 || static_cast<std::size_t>(trial_id) > schedule.trials.size()) return nullptr;
    return &schedule.trials[static_cast<std::size_t>(trial_id) - 1];
  }

  // First trial without a response, if any.
  std::optional<Trial> next_trial() const {
    for (const auto& t : schedule.trials)
      if (!responses.contains(t.trial_id)) return t;
    return std::nullopt;
  }

  friend bool operator==(const TrialSession&, const TrialSession&) = default;
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto secs = std::chrono::system_clock::to_time_t(now);
  const auto ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

inline TrialSession start_session(std::string subject, const PatternCatalog& catalog, int repetitions,
                                  std::uint64_t seed, std::string timestamp = utc_timestamp()) {
  TrialSession s;
  s.subject_id = std::move(subject);
  s.catalog_id = catalog.name;
  s.pattern_ids = catalog.ids();
  s.schedule = build_schedule(s.pattern_ids, repetitions, seed);
  s.started = std::move(timestamp);
  return s;
}

inline TrialSession record_response(TrialSession session, int trial_id, int answer,
                                    std::string timestamp = utc_timestamp()) {
  if (!session.find_trial(trial_id))
    throw Error(ErrorKind::UnknownTrial, "trial " + std::to_string(trial_id) + " is not scheduled");
  if (session.responses.contains(trial_id))
    throw Error(ErrorKind::AlreadyAnswered, "trial " + std::to_string(trial_id) + " already has an answer");
  if (!std::binary_search(session.pattern_ids.begin(), session.pattern_ids.end(), answer))
    throw Error(ErrorKind::InvalidAnswer, "answer " + std::to_string(answer) + " is not a pattern id");
  session.responses.emplace(trial_id, Response{answer, std::move(timestamp)});
  return session;
}

struct ConfusionMatrix {
  std::vector<int> ids;                  // row/column labels
  std::vector<std::vector<int>> counts;  // [presented][answered]
  std::vector<int> row_totals;

  int total() const {
    int n = 0;
    for (int r : row_totals) n += r;
    return n;
  }
};

namespace detail {

inline void check_sessions(const std::vector<TrialSession>& sessions) {
  if (sessions.empty()) throw Error(ErrorKind::IncompleteSession, "no sessions to analyze");
  for (const auto& s : sessions) {
    if (!s.complete())
      throw Error(ErrorKind::IncompleteSession, "session of subject '" + s.subject_id + "' has " +
                                                    std::to_string(s.responses.size()) + "/" +
                                                    std::to_string(s.schedule.trials.size()) + " answers");
    if (s.catalog_id != sessions.front().catalog_id || s.pattern_ids != sessions.front().pattern_ids)
      throw Error(ErrorKind::CatalogMismatch, "sessions use catalogs '" + sessions.front().catalog_id + "' and '" +
                                                  s.catalog_id + "'");
  }
}

inline std::size_t index_of(const std::vector<int>& ids, int id) {
  return static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), id) - ids.begin());
}

}  // namespace detail

inline ConfusionMatrix confusion_matrix(const std::vector<TrialSession>& sessions) {
  detail::check_sessions(sessions);
  ConfusionMatrix cm;
  cm.ids = sessions.front().pattern_ids;
  const auto k = cm.ids.size();
  cm.counts.assign(k, std::vector<int>(k, 0));
  cm.row_totals.assign(k, 0);
  for (const auto& s : sessions) {
    for (const auto& t : s.schedule.trials) {
      const auto row = detail::index_of(cm.ids, t.pattern_id);
      const auto col = detail::index_of(cm.ids, s.responses.at(t.trial_id).answer);
      ++cm.counts[row][col];
      ++cm.row_totals[row];
    }
  }
  return cm;
}

struct RecognitionRates {
  std::vector<double> rates;  // aligned with ConfusionMatrix::ids
  double mean = 0.0;          // unweighted over patterns
};

inline RecognitionRates recognition_rates(const ConfusionMatrix& cm) {
  RecognitionRates r;
  for (std::size_t i = 0; i < cm.ids.size(); ++i) {
    if (cm.row_totals[i] <= 0)
      throw Error(ErrorKind::EmptyRow, "pattern " + std::to_string(cm.ids[i]) + " was never presented");
    r.rates.push_back(static_cast<double>(cm.counts[i][i]) / cm.row_totals[i]);
  }
  if (!r.rates.empty())
    r.mean = std::accumulate(r.rates.begin(), r.rates.end(), 0.0) / static_cast<double>(r.rates.size());
  return r;
}

// One group per pattern, one observation per session: that subject's share
// of correct answers for the pattern.
inline std::vector<std::vector<double>> accuracy_groups(const std::vector<TrialSession>& sessions) {
  detail::check_sessions(sessions);
  const auto& ids = sessions.front().pattern_ids;
  std::vector<std::vector<double>> groups(ids.size());
  for (const auto& s : sessions) {
    std::vector<int> correct(ids.size(), 0), shown(ids.size(), 0);
    for (const auto& t : s.schedule.trials) {
      const auto i = detail::index_of(ids, t.pattern_id);
      ++shown[i];
      correct[i] += s.responses.at(t.trial_id).answer == t.pattern_id;
    }
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (shown[i] > 0) groups[i].push_back(static_cast<double>(correct[i]) / shown[i]);
  }
  return groups;
}

// ---------------------------------------------------------------------------
// Session log: one JSON object per line.

inline std::string log_schedule_record(const TrialSession& s, const std::string& ts = utc_timestamp()) {
  json trials = json::array();
  for (const auto& t : s.schedule.trials) trials.push_back({t.trial_id, t.pattern_id});
  json j = {{"type", "schedule"},
            {"ts", ts},
            {"subject", s.subject_id},
            {"catalog", s.catalog_id},
            {"patterns", s.pattern_ids},
            {"seed", s.schedule.seed},
            {"repetitions", s.schedule.repetitions},
            {"trials", trials}};
  return j.dump() + "\n";
}

inline std::string log_stimulus_record(const TrialSession& s, const Trial& t, const std::string& ts = utc_timestamp()) {
  json j = {{"type", "stimulus_delivered"},
            {"ts", ts},
            {"subject", s.subject_id},
            {"trial_id", t.trial_id},
            {"pattern_id", t.pattern_id}};
  return j.dump() + "\n";
}

inline std::string log_response_record(const TrialSession& s, int trial_id) {
  const auto& r = s.responses.at(trial_id);
  json j = {{"type", "response"}, {"ts", r.timestamp}, {"subject", s.subject_id}, {"trial_id", trial_id},
            {"answer", r.answer}};
  return j.dump() + "\n";
}

// Rebuilds sessions from a log. A schedule record opens a new session for its
// subject; later records for that subject apply to the newest one.
inline std::vector<TrialSession> parse_session_log(std::string_view text) {
  std::vector<TrialSession> sessions;
  std::map<std::string, std::size_t> latest;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string where = "log line " + std::to_string(line_no);
    json j;
    try {
      j = parse_json_text(line);
    } catch (const Error& e) {
      throw Error(ErrorKind::ParseError, where + ": " + e.what());
    }
    const auto type = get_or<std::string>(j, "type", "", where);
    const auto subject = get_or<std::string>(j, "subject", "", where);
    if (type == "schedule") {
      TrialSession s;
      s.subject_id = subject;
      s.catalog_id = get_or<std::string>(j, "catalog", "", where);
      s.pattern_ids = get_or<std::vector<int>>(j, "patterns", {}, where);
      std::sort(s.pattern_ids.begin(), s.pattern_ids.end());
      s.schedule.seed = get_or<std::uint64_t>(j, "seed", 0, where);
      s.schedule.repetitions = get_or(j, "repetitions", 1, where);
      s.started = get_or<std::string>(j, "ts", "", where);
      const auto trials = get_or<std::vector<std::vector<int>>>(j, "trials", {}, where);
      for (std::size_t i = 0; i < trials.size(); ++i) {
        if (trials[i].size() != 2 || trials[i][0] != static_cast<int>(i) + 1)
          throw Error(ErrorKind::ValidationError, where + ": trials must be [id, pattern] pairs numbered from 1");
        s.schedule.trials.push_back({trials[i][0], trials[i][1]});
      }
      latest[subject] = sessions.size();
      sessions.push_back(std::move(s));
    } else if (type == "response") {
      const auto it = latest.find(subject);
      if (it == latest.end())
        throw Error(ErrorKind::ValidationError, where + ": response for subject without a schedule");
      auto& s = sessions[it->second];
      s = record_response(std::move(s), get_or(j, "trial_id", 0, where), get_or(j, "answer", 0, where),
                          get_or<std::string>(j, "ts", "", where));
    } else if (type == "stimulus_delivered") {
      if (!latest.contains(subject))
        throw Error(ErrorKind::ValidationError, where + ": stimulus for subject without a schedule");
    } else {
      throw Error(ErrorKind::ValidationError, where + ": unknown record type '" + type + "'");
    }
  }
  return sessions;
}

// ---------------------------------------------------------------------------
// Analysis report.

struct AnalysisReport {
  std::string catalog;
  std::size_t sessions = 0;
  std::size_t skipped = 0;  // incomplete sessions left out
  ConfusionMatrix matrix;
  RecognitionRates rates;
  std::optional<AnovaResult> anova;
  std::string anova_note;  // reason when anova is absent
};

inline AnalysisReport analyze(const std::vector<TrialSession>& all) {
  std::vector<TrialSession> done;
  for (const auto& s : all)
    if (s.complete()) done.push_back(s);
  AnalysisReport r;
  r.skipped = all.size() - done.size();
  if (done.empty()) throw Error(ErrorKind::IncompleteSession, "log contains no complete session");
  r.catalog = done.front().catalog_id;
  r.sessions = done.size();
  r.matrix = confusion_matrix(done);
  r.rates = recognition_rates(r.matrix);
  try {
    r.anova = anova_one_way(accuracy_groups(done));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::InsufficientData && e.kind() != ErrorKind::DegenerateData) throw;
    r.anova_note = std::string(e.name());
  }
  return r;
}

namespace detail {

inline std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

}  // namespace detail

inline std::string render_report_text(const AnalysisReport& r) {
  std::ostringstream out;
  out << "catalog: " << r.catalog << "\n";
  out << "sessions: " << r.sessions << " complete, " << r.skipped << " incomplete skipped\n";
  out << "confusion matrix (rows presented, columns answered)\n";
  out << "     ";
  for (int id : r.matrix.ids) out << detail::fmt("%5.0f", id);
  out << "  total\n";
  for (std::size_t i = 0; i < r.matrix.ids.size(); ++i) {
    out << detail::fmt("%5.0f", r.matrix.ids[i]);
    for (int c : r.matrix.counts[i]) out << detail::fmt("%5.0f", c);
    out << detail::fmt("%7.0f", r.matrix.row_totals[i]) << "\n";
  }
  out << "recognition rates\n";
  for (std::size_t i = 0; i < r.matrix.ids.size(); ++i)
    out << "  pattern " << r.matrix.ids[i] << ": " << detail::fmt("%.1f%%", 100.0 * r.rates.rates[i]) << "\n";
  out << "  mean: " << detail::fmt("%.1f%%", 100.0 * r.rates.mean) << "\n";
  out << "one-way anova (per-subject proportion correct by pattern)\n";
  if (r.anova) {
    out << "  F(" << r.anova->df1 << ", " << r.anova->df2 << ") = " << detail::fmt("%.4g", r.anova->f)
        << ", p = " << detail::fmt("%.4g", r.anova->p) << (r.anova->p < 0.05 ? " (p < 0.05)" : "") << "\n";
  } else {
    out << "  not computed: " << r.anova_note << "\n";
  }
  return out.str();
}

inline json report_to_json(const AnalysisReport& r) {
  json j = {{"catalog", r.catalog},
            {"sessions", r.sessions},
            {"skipped_incomplete", r.skipped},
            {"patterns", r.matrix.ids},
            {"confusion", r.matrix.counts},
            {"row_totals", r.matrix.row_totals},
            {"rates", r.rates.rates},
            {"mean_rate", r.rates.mean}};
  if (r.anova) {
    j["anova"] = {{"f", r.anova->f}, {"df1", r.anova->df1}, {"df2", r.anova->df2}, {"p", r.anova->p},
                  {"group_means", r.anova->group_means}};
  } else {
    j["anova"] = nullptr;
    j["anova_note"] = r.anova_note;
  }
  return j;
}

}  // namespace linkring
