#pragma once

// Synthetic subject sessions with prescribed confusion-matrix diagonals.

#include <string>
#include <vector>

#include "linkring/experiment.hpp"

namespace synthetic {

// diagonal[i] correct answers for catalog pattern i, summed over `subjects`
// sessions of `reps` repetitions. Misses are spread round-robin so no subject
// carries all of them, and each miss names the next pattern id.
inline std::vector<linkring::TrialSession> sessions(const linkring::PatternCatalog& catalog,
                                                    const std::vector<int>& diagonal, int subjects, int reps,
                                                    std::uint64_t seed = 1) {
  const auto ids = catalog.ids();
  const auto k = ids.size();
  std::vector<std::vector<int>> misses(static_cast<std::size_t>(subjects), std::vector<int>(k, 0));
  for (std::size_t i = 0; i < k; ++i) {
    const int d = subjects * reps - diagonal[i];
    for (int m = 0; m < d; ++m) ++misses[(i + static_cast<std::size_t>(m)) % static_cast<std::size_t>(subjects)][i];
  }
  std::vector<linkring::TrialSession> out;
  for (int s = 0; s < subjects; ++s) {
    auto session = linkring::start_session("S" + std::to_string(s + 1), catalog, reps,
                                           seed + static_cast<std::uint64_t>(s), "2024-01-01T00:00:00Z");
    auto miss = misses[static_cast<std::size_t>(s)];
    for (const auto& t : session.schedule.trials) {
      const auto i = static_cast<std::size_t>(std::find(ids.begin(), ids.end(), t.pattern_id) - ids.begin());
      int answer = t.pattern_id;
      if (miss[i] > 0) {
        --miss[i];
        answer = ids[(i + 1) % k];
      }
      session = linkring::record_response(std::move(session), t.trial_id, answer, "2024-01-01T00:00:01Z");
    }
    out.push_back(std::move(session));
  }
  return out;
}

inline const std::vector<int> kStaticDiagonal{49, 45, 44, 49, 50, 45, 45, 44, 34};
inline const std::vector<int> kDynamicDiagonal{43, 52, 49, 43, 36};

}  // namespace synthetic
