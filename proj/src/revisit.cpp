// SPDX-License-Identifier: Apache-2.0
#include "recap/revisit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

namespace recap {

RevisitStats compute_history_stats(std::span<const SequenceEntry> history, std::int32_t t,
                                   int window, int cap) {
  RevisitStats stats;
  const auto limit = std::min<std::size_t>(history.size(), static_cast<std::size_t>(std::max(t, 0)));
  std::unordered_map<PoiIndex, std::size_t> slot;
  for (std::size_t i = limit; i-- > 0;) {
    const auto& e = history[i];
    if (e.poi == kUnknownPoi) continue;
    auto it = slot.find(e.poi);
    if (it != slot.end()) {
      ++stats.candidates[it->second].count;
      continue;
    }
    if (static_cast<int>(stats.candidates.size()) >= cap) continue;
    RevisitCandidate c;
    c.poi = e.poi;
    c.count = 1;
    c.last_step = static_cast<std::int32_t>(i);
    c.recency = t - c.last_step;
    c.in_window = c.recency <= window;
    c.last_tod = time_of_day_fraction(e.timestamp);
    c.last_hour = hour_of_day(e.timestamp);
    c.last_dow = day_of_week(e.timestamp);
    slot.emplace(e.poi, stats.candidates.size());
    stats.candidates.push_back(c);
  }
  return stats;
}

std::array<double, 3> revisit_stat_vector(const RevisitCandidate& c, double tau) {
  return {std::log1p(static_cast<double>(c.count)),
          std::exp(-static_cast<double>(c.recency) / tau), c.in_window ? 1.0 : 0.0};
}

std::array<double, 3> pair_features(const RevisitCandidate& c, std::int64_t query_time) {
  const double diff = 2.0 * std::numbers::pi * (time_of_day_fraction(query_time) - c.last_tod);
  return {std::cos(diff), std::sin(diff), day_of_week(query_time) == c.last_dow ? 1.0 : 0.0};
}

double revisit_prior_value(const RevisitCandidate& c, const RevisitWeights& w) {
  const auto a = revisit_stat_vector(c, w.tau);
  const double z = w.lambda_prior * (w.w_count * a[0] + w.w_recency * a[1] + w.w_window * a[2]);
  return std::clamp(z, 0.0, w.b_max);
}

}  // namespace recap
