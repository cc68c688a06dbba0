// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "recap/dataset.hpp"

namespace recap {

class InfeasibleSpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Planted world: a sparse successor graph walked by users who also jump to
/// drifting favourite POIs and take occasional two-step skips. Withheld
/// pairs (s, d) are two hops apart through a planted intermediate and only
/// appear as adjacent check-ins after the training cut.
struct SyntheticWorldSpec {
  int num_users = 50;
  int num_pois = 200;
  int num_checkins = 20000;
  int num_categories = 10;
  int out_degree = 3;
  int num_withheld = 100;

  double skip_prob = 0.15;       // two-step jump along the successor graph
  double revisit_min = 0.2;      // per-user favourite-jump probability range
  double revisit_max = 0.4;
  int favorites = 3;
  double favorite_drift = 0.25;  // chance per session of swapping a favourite
  double shortcut_prob = 0.2;    // withheld jump after the cut, mid-session
  double shortcut_prob_final = 0.6;  // same, on the last step of a session

  int session_min = 3;
  int session_max = 8;
  double train_ratio = 0.8;
  std::int64_t start_time = 1333238400;  // 2012-04-01 UTC
  std::uint64_t seed = 7;

  /// Throws InfeasibleSpecError.
  void validate() const;
};

struct PlantedTriple {
  PoiIndex source = 0;
  PoiIndex via = 0;
  PoiIndex target = 0;
};

struct SyntheticWorld {
  std::vector<CheckIn> checkins;  // per user, chronological
  std::vector<std::vector<PoiIndex>> successors;
  std::vector<PlantedTriple> triples;
  std::int64_t cut_time = 0;  // shortcuts only leave check-ins strictly after this

  static std::string poi_id(PoiIndex p);
  static std::string user_id(int u);
  nlohmann::json sidecar(const SyntheticWorldSpec& spec) const;
};

SyntheticWorld generate_world(const SyntheticWorldSpec& spec);

/// Tab-separated user, poi, category, lat, lon, epoch seconds; no header.
void write_checkins(const std::vector<CheckIn>& checkins, const std::filesystem::path& path);

nlohmann::json spec_to_json(const SyntheticWorldSpec& spec);
/// Missing keys keep defaults; unknown keys throw InfeasibleSpecError.
SyntheticWorldSpec spec_from_json(const nlohmann::json& j);

}  // namespace recap
