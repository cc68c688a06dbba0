// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "recap/transition_graph.hpp"

namespace recap {
namespace {

TransitionStore random_store(std::mt19937_64& rng, PoiIndex n, int edges) {
  TransitionStore s(n);
  std::uniform_int_distribution<PoiIndex> poi(0, n - 1);
  std::uniform_int_distribution<int> count(1, 9);
  for (int e = 0; e < edges; ++e) s.add(poi(rng), poi(rng), count(rng));
  return s;
}

ag::Matrix dense_adjacency(const TransitionStore& s) {
  const PoiIndex n = s.num_pois();
  ag::Matrix a = ag::Matrix::Zero(n, n);
  for (PoiIndex i = 0; i < n; ++i)
    for (const auto& [d, m] : s.row(i)) a(i, d) = static_cast<double>(m) / static_cast<double>(s.out_mass(i));
  return a;
}

TEST(Counts, AbabTrajectory) {
  std::vector<std::vector<PoiIndex>> traj = {{0, 1, 0, 1}};
  auto s = count_transitions(traj, 2);
  EXPECT_EQ(s.count(0, 1), 2);
  EXPECT_EQ(s.count(1, 0), 1);
  EXPECT_TRUE(s.is_warm(0, 1));
  EXPECT_FALSE(s.is_warm(1, 0));
  EXPECT_EQ(s.warm_edges(), (std::vector<Transition>{{0, 1}}));
}

TEST(Counts, EmptyTrainingSet) {
  std::vector<std::vector<PoiIndex>> none;
  auto s = count_transitions(none, 4);
  EXPECT_EQ(s.num_edges(), 0u);
  for (PoiIndex p = 0; p < 4; ++p) EXPECT_EQ(s.out_mass(p), 0);
}

TEST(Counts, RandomTrajectoriesMatchPairEnumeration) {
  std::mt19937_64 rng(17);
  std::vector<std::vector<PoiIndex>> traj(1000);
  for (auto& t : traj) {
    t.resize(1 + rng() % 8);
    for (auto& p : t) p = static_cast<PoiIndex>(rng() % 30);
  }
  auto s = count_transitions(traj, 30);
  std::map<Transition, std::int64_t> oracle;
  for (const auto& t : traj)
    for (std::size_t i = 0; i + 1 < t.size(); ++i) ++oracle[{t[i], t[i + 1]}];
  EXPECT_EQ(s.num_edges(), oracle.size());
  for (PoiIndex a = 0; a < 30; ++a)
    for (PoiIndex b = 0; b < 30; ++b) {
      auto it = oracle.find({a, b});
      EXPECT_EQ(s.count(a, b), it == oracle.end() ? 0 : it->second);
    }
}

TEST(Counts, SequencesRespectTrajectoriesAndSplits) {
  UserSequence u;
  u.checkins = {{0, 0, Split::kTrain}, {1, 60, Split::kTrain}, {2, 200000, Split::kTrain},
                {0, 200060, Split::kTrain}, {1, 200120, Split::kVal}, {kUnknownPoi, 200180, Split::kVal}};
  segment_trajectories(u, 86400);
  std::vector<UserSequence> seqs = {u};
  auto within = count_transitions(seqs, 3);
  EXPECT_EQ(within.count(0, 1), 1);
  EXPECT_EQ(within.count(1, 2), 0);
  EXPECT_EQ(within.count(2, 0), 1);
  EXPECT_EQ(within.num_edges(), 2u);
  auto across = count_transitions(seqs, 3, true);
  EXPECT_EQ(across.count(1, 2), 1);
  EXPECT_EQ(across.count(0, 1), 1);  // the val check-in never counts
}

TEST(Normalize, SingleEdgeIsOne) {
  TransitionStore s(3);
  s.add(0, 2, 7);
  auto a = dense_adjacency(s);
  auto m = normalize(s);
  EXPECT_DOUBLE_EQ(m.adjacency->coeff(0, 2), 1.0);
  EXPECT_DOUBLE_EQ(a(0, 2), 1.0);
}

TEST(Normalize, ThreeToOne) {
  TransitionStore s(3);
  s.add(0, 1, 3);
  s.add(0, 2, 1);
  auto m = normalize(s);
  EXPECT_DOUBLE_EQ(m.adjacency->coeff(0, 1), 0.75);
  EXPECT_DOUBLE_EQ(m.adjacency->coeff(0, 2), 0.25);
}

TEST(Normalize, RandomRowsSumToOneOrZero) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const PoiIndex n = 1 + static_cast<PoiIndex>(rng() % 40);
    auto s = random_store(rng, n, static_cast<int>(rng() % 80));
    ag::Matrix a = *normalize(s).adjacency;
    for (PoiIndex i = 0; i < n; ++i) {
      const double sum = a.row(i).sum();
      if (s.out_mass(i) == 0) {
        EXPECT_EQ(sum, 0.0);
      } else {
        EXPECT_NEAR(sum, 1.0, 1e-6);
      }
      EXPECT_GE(a.row(i).minCoeff(), 0.0);
    }
  }
}

TEST(Propagate, ZeroHopsIsIdentity) {
  TransitionStore s(3);
  s.add(0, 1);
  ag::Matrix e = ag::Matrix::Random(3, 4);
  EXPECT_EQ(propagate(e, normalize(s), 0), e);
}

TEST(Propagate, ChainTwoHops) {
  TransitionStore s(3);
  s.add(0, 1);
  s.add(1, 2);
  ag::Matrix e(3, 2);
  e << 1, 2, 3, 4, 5, 6;
  ag::Matrix g = propagate(e, normalize(s), 2);
  EXPECT_EQ(g.row(0), e.row(2));
  EXPECT_EQ(g.row(1), ag::Matrix::Zero(1, 2));
}

TEST(Propagate, MatchesDensePowerOracle) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 50; ++trial) {
    const PoiIndex n = 2 + static_cast<PoiIndex>(rng() % 49);
    const auto dims = static_cast<ag::Index>(1 + rng() % 8);
    const int hops = static_cast<int>(rng() % 6);
    auto s = random_store(rng, n, static_cast<int>(rng() % (3 * n)));
    ag::Matrix e = ag::Matrix::Random(n, dims);
    ag::Matrix a = dense_adjacency(s);
    ag::Matrix oracle = e;
    for (int h = 0; h < hops; ++h) oracle = a * oracle;
    ag::Matrix got = propagate(e, normalize(s), hops);
    EXPECT_LE((got - oracle).cwiseAbs().maxCoeff(), 1e-5);
  }
}

TEST(Propagate, DifferentiableVariantAgreesAndPassesGradient) {
  std::mt19937_64 rng(31);
  auto s = random_store(rng, 12, 30);
  auto m = normalize(s);
  ag::Matrix e = ag::Matrix::Random(12, 3);
  ag::Var p = ag::parameter(e);
  ag::Var g = propagate(p, m, 2);
  EXPECT_LE((g.value() - propagate(e, m, 2)).cwiseAbs().maxCoeff(), 1e-12);
  ag::backward(ag::sum(g));
  // d sum(A^2 E) / dE = (A^2)^T 1
  ag::Matrix a = dense_adjacency(s);
  ag::Matrix expect = (a * a).transpose() * ag::Matrix::Ones(12, 3);
  EXPECT_LE((p.grad() - expect).cwiseAbs().maxCoeff(), 1e-12);
}

std::vector<PoiIndex> bfs_oracle(const TransitionStore& s, PoiIndex source, int hops) {
  std::set<PoiIndex> seen;
  std::set<PoiIndex> frontier = {source};
  for (int h = 0; h < hops; ++h) {
    std::set<PoiIndex> next;
    for (PoiIndex p : frontier)
      for (const auto& [d, m] : s.row(p)) next.insert(d);
    seen.insert(next.begin(), next.end());
    frontier = next;
  }
  return {seen.begin(), seen.end()};
}

TEST(HopCandidates, Chain) {
  TransitionStore s(3);
  s.add(0, 1);
  s.add(1, 2);
  EXPECT_EQ(hop_candidates(s, 0, 1), (std::vector<PoiIndex>{1}));
  EXPECT_EQ(hop_candidates(s, 0, 2), (std::vector<PoiIndex>{1, 2}));
}

TEST(HopCandidates, MatchBfs) {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 30; ++trial) {
    const PoiIndex n = 2 + static_cast<PoiIndex>(rng() % 30);
    auto s = random_store(rng, n, static_cast<int>(rng() % (2 * n)));
    for (int hops = 1; hops <= 5; ++hops)
      for (PoiIndex src = 0; src < n; ++src) EXPECT_EQ(hop_candidates(s, src, hops), bfs_oracle(s, src, hops));
  }
}

TEST(Coverage, OneHopCoversNothingUnseen) {
  std::mt19937_64 rng(41);
  auto s = random_store(rng, 20, 40);
  std::vector<Transition> unseen;
  for (PoiIndex a = 0; a < 20; ++a)
    for (PoiIndex b = 0; b < 20; ++b)
      if (s.count(a, b) == 0 && rng() % 5 == 0) unseen.push_back({a, b});
  std::vector<int> hops = {1};
  auto r = coverage_snr(unseen, s, hops);
  EXPECT_EQ(r.records[0].covered, 0u);
  EXPECT_EQ(r.records[0].coverage, 0.0);
}

TEST(Coverage, PlantedTwoHopPathsFullyCovered) {
  TransitionStore s(6);
  s.add(0, 1);
  s.add(1, 2);
  s.add(3, 4);
  s.add(4, 5);
  std::vector<Transition> unseen = {{0, 2}, {3, 5}, {3, 5}};
  std::vector<int> hops = {1, 2};
  auto r = coverage_snr(unseen, s, hops);
  EXPECT_EQ(r.unseen, 2u);
  EXPECT_DOUBLE_EQ(r.records[1].coverage, 1.0);
  EXPECT_EQ(r.records[1].candidates, 4u);
  EXPECT_DOUBLE_EQ(r.records[1].snr, 1.0);
}

TEST(Coverage, MatchesExhaustiveEnumeration) {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 20; ++trial) {
    const PoiIndex n = 3 + static_cast<PoiIndex>(rng() % 15);
    auto s = random_store(rng, n, static_cast<int>(rng() % (2 * n)));
    std::set<Transition> unseen_set;
    for (PoiIndex a = 0; a < n; ++a)
      for (PoiIndex b = 0; b < n; ++b)
        if (s.count(a, b) == 0 && rng() % 4 == 0) unseen_set.insert({a, b});
    std::vector<Transition> unseen(unseen_set.begin(), unseen_set.end());
    std::vector<int> hops = {1, 2, 3, 4, 5};
    auto r = coverage_snr(unseen, s, hops);
    std::set<PoiIndex> sources;
    for (auto& [a, b] : unseen) sources.insert(a);
    for (std::size_t i = 0; i < hops.size(); ++i) {
      std::size_t covered = 0, candidates = 0;
      for (PoiIndex src : sources) candidates += bfs_oracle(s, src, hops[i]).size();
      for (auto& [a, b] : unseen) {
        auto c = bfs_oracle(s, a, hops[i]);
        covered += std::binary_search(c.begin(), c.end(), b);
      }
      EXPECT_EQ(r.records[i].covered, covered);
      EXPECT_EQ(r.records[i].candidates, candidates);
      if (candidates == covered) {
        EXPECT_TRUE(r.records[i].snr_infinite);
      } else {
        EXPECT_DOUBLE_EQ(r.records[i].snr, static_cast<double>(covered) / static_cast<double>(candidates - covered));
      }
    }
  }
}

}  // namespace
}  // namespace recap
