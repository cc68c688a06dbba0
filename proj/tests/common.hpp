// SPDX-License-Identifier: Apache-2.0
// Fixtures shared by the unit tests.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "recap/dataset.hpp"
#include "recap/model.hpp"
#include "recap/synth.hpp"
#include "recap/training.hpp"
#include "recap/transition_graph.hpp"

namespace recap::testing {

inline CheckIn checkin(const std::string& user, const std::string& poi, std::int64_t t,
                       const std::string& category = "c0") {
  CheckIn c;
  c.user_id = user;
  c.poi_id = poi;
  c.category_id = category;
  c.lat = 40.7 + 0.001 * static_cast<double>(poi.size());
  c.lon = -74.0;
  c.timestamp = t;
  return c;
}

inline SyntheticWorldSpec small_spec(std::uint64_t seed = 3) {
  SyntheticWorldSpec s;
  s.num_users = 8;
  s.num_pois = 40;
  s.num_checkins = 2000;
  s.num_categories = 4;
  s.num_withheld = 4;
  s.seed = seed;
  return s;
}

inline InstanceStore small_store(int k = 4, std::uint64_t seed = 3) {
  DatasetOptions o;
  o.k = k;
  return prepare_dataset(generate_world(small_spec(seed)).checkins, o);
}

/// hidden 16, k as given, no dropout.
inline ModelConfig tiny_config(int k = 4) {
  ModelConfig m;
  m.k = k;
  m.poi_dim = 8;
  m.category_dim = 4;
  m.hidden = 16;
  m.ffn = 32;
  m.layers = 1;
  m.heads = 2;
  m.dropout = m.embedding_dropout = m.output_dropout = m.graph_dropout = 0.0;
  m.graph_hidden = 16;
  m.candidate_cap = 16;
  m.calibration_hidden = 8;
  m.time_dim = 4;
  return m;
}

inline Batch make_batch(std::span<const PredictionInstance> instances, std::span<const RevisitStats> stats,
                        std::size_t begin, std::size_t count) {
  Batch b;
  for (std::size_t i = begin; i < begin + count && i < instances.size(); ++i) {
    b.instances.push_back(&instances[i]);
    if (!stats.empty()) b.stats.push_back(&stats[i]);
  }
  return b;
}

}  // namespace recap::testing
