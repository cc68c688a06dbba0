// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "recap/dataset.hpp"

namespace recap {

/// History statistics of one previously visited POI.
struct RevisitCandidate {
  PoiIndex poi = kUnknownPoi;
  std::int32_t count = 0;      // n_t(d)
  std::int32_t recency = 0;    // r_t(d) = t - last visit step, in check-in steps
  bool in_window = false;      // visited within the last L_win check-ins
  std::int32_t last_step = 0;  // q*_t(d)
  double last_tod = 0.0;       // fraction of day of the last visit
  int last_hour = 0;
  int last_dow = 0;
};

/// Candidates ordered from most to least recently visited.
struct RevisitStats {
  std::vector<RevisitCandidate> candidates;
};

/// Statistics over `history` = the user's check-ins at positions [0, t).
/// Entries with unknown POIs occupy a step but are never candidates. Only the
/// `cap` most recently visited distinct POIs are kept; their counts still
/// cover the whole prefix.
RevisitStats compute_history_stats(std::span<const SequenceEntry> history, std::int32_t t,
                                   int window, int cap);

/// [log(1 + n), exp(-r / tau), in_window]
std::array<double, 3> revisit_stat_vector(const RevisitCandidate& c, double tau);

/// [cos(2pi dtod), sin(2pi dtod), same day-of-week]
std::array<double, 3> pair_features(const RevisitCandidate& c, std::int64_t query_time);

/// Plain-valued revisit prior parameters, used for reporting and checks.
struct RevisitWeights {
  double lambda_prior = 0.1;
  double w_count = 0.1;
  double w_recency = 0.1;
  double w_window = 0.1;
  double tau = 1.0;
  double b_max = 5.0;
};

/// clip_[0, b_max](lambda_prior * (w_cnt log(1+n) + w_rec exp(-r/tau) + w_win 1[window]))
double revisit_prior_value(const RevisitCandidate& c, const RevisitWeights& w);

}  // namespace recap
