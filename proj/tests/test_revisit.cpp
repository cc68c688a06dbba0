// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include "recap/revisit.hpp"

namespace recap {
namespace {

std::vector<SequenceEntry> history_of(const std::vector<PoiIndex>& pois, std::int64_t t0 = 1333368000,
                                      std::int64_t step = 3600) {
  std::vector<SequenceEntry> h;
  for (std::size_t i = 0; i < pois.size(); ++i)
    h.push_back({pois[i], t0 + static_cast<std::int64_t>(i) * step, Split::kTrain});
  return h;
}

TEST(HistoryStats, EmptyHistory) {
  std::vector<SequenceEntry> none;
  EXPECT_TRUE(compute_history_stats(none, 0, 10, 256).candidates.empty());
}

TEST(HistoryStats, AbaAtThree) {
  auto h = history_of({0, 1, 0});
  auto s = compute_history_stats(h, 3, 10, 256);
  ASSERT_EQ(s.candidates.size(), 2u);
  const auto& a = s.candidates[0];
  const auto& b = s.candidates[1];
  EXPECT_EQ(a.poi, 0);
  EXPECT_EQ(a.count, 2);
  EXPECT_EQ(a.recency, 1);
  EXPECT_EQ(b.poi, 1);
  EXPECT_EQ(b.count, 1);
  EXPECT_EQ(b.recency, 2);
  EXPECT_TRUE(a.in_window);
  EXPECT_EQ(a.last_step, 2);
  EXPECT_EQ(a.last_hour, hour_of_day(h[2].timestamp));
}

TEST(HistoryStats, WindowAndUnknownEntries) {
  auto h = history_of({5, kUnknownPoi, 6, 7, 8});
  auto s = compute_history_stats(h, 5, 2, 256);
  std::map<PoiIndex, RevisitCandidate> by;
  for (auto& c : s.candidates) by[c.poi] = c;
  EXPECT_EQ(by.count(kUnknownPoi), 0u);
  EXPECT_TRUE(by[8].in_window);
  EXPECT_TRUE(by[7].in_window);
  EXPECT_FALSE(by[6].in_window);
  EXPECT_EQ(by[5].recency, 5);
}

TEST(HistoryStats, CapKeepsMostRecent) {
  auto h = history_of({0, 1, 2, 3, 0});
  auto s = compute_history_stats(h, 5, 10, 2);
  ASSERT_EQ(s.candidates.size(), 2u);
  EXPECT_EQ(s.candidates[0].poi, 0);
  EXPECT_EQ(s.candidates[0].count, 2);
  EXPECT_EQ(s.candidates[1].poi, 3);
}

TEST(HistoryStats, RandomHistoriesMatchLinearScan) {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t len = 1 + rng() % 500;
    std::vector<SequenceEntry> h;
    std::int64_t t = 1333238400;
    for (std::size_t i = 0; i < len; ++i) {
      t += static_cast<std::int64_t>(rng() % 20000);
      const PoiIndex p = rng() % 17 == 0 ? kUnknownPoi : static_cast<PoiIndex>(rng() % 40);
      h.push_back({p, t, Split::kTrain});
    }
    const auto step = static_cast<std::int32_t>(len);
    const int window = static_cast<int>(rng() % 20);
    auto s = compute_history_stats(h, step, window, 1 << 20);

    std::map<PoiIndex, std::pair<int, std::size_t>> oracle;  // count, last position
    for (std::size_t i = 0; i < len; ++i) {
      if (h[i].poi == kUnknownPoi) continue;
      auto& o = oracle[h[i].poi];
      ++o.first;
      o.second = i;
    }
    ASSERT_EQ(s.candidates.size(), oracle.size());
    for (const auto& c : s.candidates) {
      const auto& [n, last] = oracle.at(c.poi);
      EXPECT_EQ(c.count, n);
      EXPECT_EQ(c.recency, step - static_cast<std::int32_t>(last));
      EXPECT_EQ(c.in_window, step - static_cast<std::int32_t>(last) <= window);
      EXPECT_EQ(c.last_dow, day_of_week(h[last].timestamp));
      EXPECT_EQ(c.last_hour, hour_of_day(h[last].timestamp));
      EXPECT_EQ(c.last_tod, time_of_day_fraction(h[last].timestamp));
    }
    for (std::size_t i = 1; i < s.candidates.size(); ++i)
      EXPECT_LT(s.candidates[i - 1].recency, s.candidates[i].recency);
  }
}

TEST(Prior, LogFourFromCountsOnly) {
  RevisitCandidate c;
  c.count = 3;
  c.recency = 4;
  c.in_window = true;
  RevisitWeights w;
  w.lambda_prior = 1.0;
  w.w_count = 1.0;
  w.w_recency = 0.0;
  w.w_window = 0.0;
  w.b_max = 2.0;
  EXPECT_NEAR(revisit_prior_value(c, w), std::log(4.0), 1e-12);
  EXPECT_NEAR(revisit_prior_value(c, w), 1.3863, 1e-4);
}

TEST(Prior, NegativeClipsToZero) {
  RevisitCandidate c;
  c.count = 0;
  c.recency = 1;
  c.in_window = true;
  RevisitWeights w;
  w.lambda_prior = 1.0;
  w.w_count = 0.0;
  w.w_recency = 0.0;
  w.w_window = -0.7;
  EXPECT_EQ(revisit_prior_value(c, w), 0.0);
}

TEST(Prior, UpperClip) {
  RevisitCandidate c;
  c.count = 1000;
  RevisitWeights w;
  w.lambda_prior = 10.0;
  w.w_count = 10.0;
  w.b_max = 5.0;
  EXPECT_EQ(revisit_prior_value(c, w), 5.0);
}

TEST(Prior, StatVector) {
  RevisitCandidate c;
  c.count = 3;
  c.recency = 2;
  c.in_window = false;
  auto a = revisit_stat_vector(c, 4.0);
  EXPECT_DOUBLE_EQ(a[0], std::log(4.0));
  EXPECT_DOUBLE_EQ(a[1], std::exp(-0.5));
  EXPECT_DOUBLE_EQ(a[2], 0.0);
}

TEST(PairFeatures, SameTimeOfDay) {
  RevisitCandidate c;
  const std::int64_t last = 1333368000;  // Monday noon
  c.last_tod = time_of_day_fraction(last);
  c.last_dow = day_of_week(last);
  auto same_day = pair_features(c, last + 7 * 86400);
  EXPECT_NEAR(same_day[0], 1.0, 1e-12);
  EXPECT_NEAR(same_day[1], 0.0, 1e-12);
  EXPECT_EQ(same_day[2], 1.0);
  auto next_day = pair_features(c, last + 86400);
  EXPECT_EQ(next_day[2], 0.0);
}

TEST(PairFeatures, HalfDayApart) {
  RevisitCandidate c;
  const std::int64_t last = 1333368000;
  c.last_tod = time_of_day_fraction(last);
  c.last_dow = day_of_week(last);
  auto f = pair_features(c, last + 43200);
  EXPECT_NEAR(f[0], -1.0, 1e-9);
  EXPECT_NEAR(f[1], 0.0, 1e-9);
}

TEST(PairFeatures, RandomMatchesHandEvaluation) {
  std::mt19937_64 rng(59);
  for (int i = 0; i < 100; ++i) {
    const std::int64_t last = 1333238400 + static_cast<std::int64_t>(rng() % 10000000);
    const std::int64_t now = last + static_cast<std::int64_t>(rng() % 1000000);
    RevisitCandidate c;
    c.last_tod = time_of_day_fraction(last);
    c.last_dow = day_of_week(last);
    const double d = time_of_day_fraction(now) - c.last_tod;
    auto f = pair_features(c, now);
    EXPECT_NEAR(f[0], std::cos(2 * std::numbers::pi * d), 1e-12);
    EXPECT_NEAR(f[1], std::sin(2 * std::numbers::pi * d), 1e-12);
    EXPECT_EQ(f[2], day_of_week(now) == day_of_week(last) ? 1.0 : 0.0);
  }
}

}  // namespace
}  // namespace recap
