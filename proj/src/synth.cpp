// SPDX-License-Identifier: Apache-2.0
#include "recap/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>

namespace recap {

namespace {

using Rng = std::mt19937_64;

double uniform01(Rng& rng) { return std::generate_canonical<double, 53>(rng); }

template <typename T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  return v[static_cast<std::size_t>(rng() % v.size())];
}

PoiIndex random_poi(int n, Rng& rng) { return static_cast<PoiIndex>(rng() % static_cast<std::uint64_t>(n)); }

int band_of_hour(int hour) { return hour < 12 ? 0 : (hour < 17 ? 1 : 2); }

}  // namespace

void SyntheticWorldSpec::validate() const {
  auto fail = [](const std::string& m) { throw InfeasibleSpecError("infeasible synthetic spec: " + m); };
  if (num_users < 1 || num_pois < 2 || num_checkins < num_users * 2) fail("too few users, POIs or check-ins");
  if (num_categories < 1) fail("num_categories must be >= 1");
  if (out_degree < 1 || out_degree >= num_pois) fail("out_degree must lie in [1, num_pois)");
  if (num_withheld < 0) fail("num_withheld must be >= 0");
  if (favorites < 1) fail("favorites must be >= 1");
  if (session_min < 2 || session_max < session_min) fail("session lengths must satisfy 2 <= min <= max");
  for (double p : {skip_prob, revisit_min, revisit_max, favorite_drift, shortcut_prob, shortcut_prob_final})
    if (p < 0 || p > 1) fail("probabilities must lie in [0, 1]");
  if (revisit_min > revisit_max) fail("revisit_min exceeds revisit_max");
  if (skip_prob + revisit_max > 1) fail("skip_prob + revisit_max exceeds 1");
  if (train_ratio <= 0 || train_ratio >= 1) fail("train_ratio must lie in (0, 1)");
}

std::string SyntheticWorld::poi_id(PoiIndex p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "poi_%04d", p);
  return buf;
}

std::string SyntheticWorld::user_id(int u) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "user_%03d", u);
  return buf;
}

SyntheticWorld generate_world(const SyntheticWorldSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const int P = spec.num_pois;
  SyntheticWorld world;

  // Successor graph.
  world.successors.resize(static_cast<std::size_t>(P));
  for (PoiIndex p = 0; p < P; ++p) {
    auto& out = world.successors[static_cast<std::size_t>(p)];
    while (static_cast<int>(out.size()) < spec.out_degree) {
      const PoiIndex q = random_poi(P, rng);
      if (q != p && std::find(out.begin(), out.end(), q) == out.end()) out.push_back(q);
    }
  }
  auto succ = [&](PoiIndex p) -> const std::vector<PoiIndex>& { return world.successors[static_cast<std::size_t>(p)]; };

  // Planted triples: one withheld target per source first, then more if needed.
  std::vector<PoiIndex> order(static_cast<std::size_t>(P));
  for (PoiIndex p = 0; p < P; ++p) order[static_cast<std::size_t>(p)] = p;
  std::shuffle(order.begin(), order.end(), rng);
  std::set<std::pair<PoiIndex, PoiIndex>> withheld;
  std::map<PoiIndex, std::vector<PoiIndex>> withheld_from;
  for (int round = 0; static_cast<int>(world.triples.size()) < spec.num_withheld; ++round) {
    bool progressed = false;
    for (PoiIndex s : order) {
      if (static_cast<int>(world.triples.size()) >= spec.num_withheld) break;
      std::vector<PlantedTriple> options;
      // Only the two dominant successor edges, so the planted path is walked often.
      const std::size_t fan = std::min<std::size_t>(2, succ(s).size());
      for (std::size_t a = 0; a < fan; ++a)
        for (std::size_t b = 0; b < std::min<std::size_t>(2, succ(succ(s)[a]).size()); ++b) {
          const PoiIndex via = succ(s)[a];
          const PoiIndex d = succ(via)[b];
          if (d != s && std::find(succ(s).begin(), succ(s).end(), d) == succ(s).end() &&
              !withheld.count({s, d}))
            options.push_back({s, via, d});
        }
      if (options.empty()) continue;
      const PlantedTriple t = pick(options, rng);
      world.triples.push_back(t);
      withheld.insert({t.source, t.target});
      withheld_from[t.source].push_back(t.target);
      progressed = true;
    }
    if (!progressed)
      throw InfeasibleSpecError("infeasible synthetic spec: only " + std::to_string(world.triples.size()) +
                                " withheld pairs have a two-hop intermediate, " +
                                std::to_string(spec.num_withheld) + " requested");
    (void)round;
  }

  // Schedules first, so the cut time is known before walking.
  std::vector<std::vector<std::vector<std::int64_t>>> schedule(static_cast<std::size_t>(spec.num_users));
  std::vector<std::int64_t> all_times;
  for (int u = 0; u < spec.num_users; ++u) {
    const int quota = spec.num_checkins / spec.num_users + (u < spec.num_checkins % spec.num_users ? 1 : 0);
    std::int64_t day = spec.start_time / 86400 + static_cast<std::int64_t>(rng() % 3);
    int emitted = 0;
    auto& sessions = schedule[static_cast<std::size_t>(u)];
    while (emitted < quota) {
      int len = spec.session_min + static_cast<int>(rng() % static_cast<std::uint64_t>(spec.session_max - spec.session_min + 1));
      len = std::min(len, quota - emitted);
      if (len < 2 && !sessions.empty()) {
        sessions.back().push_back(sessions.back().back() + 3600);
        all_times.push_back(sessions.back().back());
        ++emitted;
        continue;
      }
      const int start_hour = 7 + static_cast<int>(rng() % 10);
      std::int64_t t = day * 86400 + start_hour * 3600 + static_cast<std::int64_t>(rng() % 1800);
      std::vector<std::int64_t> times;
      for (int i = 0; i < len; ++i) {
        times.push_back(t);
        all_times.push_back(t);
        t += 3600 + static_cast<std::int64_t>(rng() % 600);
      }
      sessions.push_back(std::move(times));
      emitted += len;
      day += 2 + static_cast<std::int64_t>(rng() % 2);  // next session starts > 24h after this one ends
    }
  }
  std::vector<std::int64_t> sorted = all_times;
  std::sort(sorted.begin(), sorted.end());
  world.cut_time = sorted[static_cast<std::size_t>(std::floor(spec.train_ratio * static_cast<double>(sorted.size()) + 1e-9))];

  // Walks.
  std::vector<std::pair<double, double>> coords(static_cast<std::size_t>(P));
  for (auto& c : coords) c = {40.55 + 0.35 * uniform01(rng), -74.15 + 0.40 * uniform01(rng)};
  std::set<std::pair<PoiIndex, PoiIndex>> train_edges;

  // Small worlds can miss a planted path by chance; redraw the walks until
  // every path occurs before the cut.
  constexpr int kWalkAttempts = 20;
  for (int attempt = 1;; ++attempt) {
    world.checkins.clear();
    train_edges.clear();
    for (int u = 0; u < spec.num_users; ++u) {
      const double revisit = spec.revisit_min + (spec.revisit_max - spec.revisit_min) * uniform01(rng);
      std::vector<PoiIndex> favs;
      while (static_cast<int>(favs.size()) < spec.favorites) {
        const PoiIndex f = random_poi(P, rng);
        if (std::find(favs.begin(), favs.end(), f) == favs.end()) favs.push_back(f);
      }
      PoiIndex prev = -1;
      for (const auto& times : schedule[static_cast<std::size_t>(u)]) {
        if (uniform01(rng) < spec.favorite_drift) {
          const PoiIndex f = random_poi(P, rng);
          if (std::find(favs.begin(), favs.end(), f) == favs.end())
            favs[static_cast<std::size_t>(rng() % favs.size())] = f;
        }
        auto favourite_for = [&](std::int64_t ts, PoiIndex avoid) {
          const int band = band_of_hour(hour_of_day(ts));
          std::vector<double> w;
          double total = 0;
          for (std::size_t i = 0; i < favs.size(); ++i) {
            const double wi = favs[i] == avoid ? 0.0 : (static_cast<int>(i % 3) == band ? 3.0 : 1.0);
            w.push_back(wi);
            total += wi;
          }
          if (total == 0) return PoiIndex{-1};
          double r = uniform01(rng) * total;
          for (std::size_t i = 0; i < w.size(); ++i) {
            if (r < w[i]) return favs[i];
            r -= w[i];
          }
          return favs.back();
        };

        PoiIndex cur = uniform01(rng) < 0.5 ? favourite_for(times[0], -1) : random_poi(P, rng);
        for (std::size_t i = 0; i < times.size(); ++i) {
          if (i > 0) {
            const bool after_cut = times[i - 1] > world.cut_time;
            const bool last = i + 1 == times.size();
            PoiIndex next = -1;
            auto wf = withheld_from.find(cur);
            if (after_cut && wf != withheld_from.end() &&
                uniform01(rng) < (last ? spec.shortcut_prob_final : spec.shortcut_prob)) {
              next = pick(wf->second, rng);
            } else {
              const double r = uniform01(rng);
              if (r < revisit) next = favourite_for(times[i], cur);
              if (next < 0 && r < revisit + spec.skip_prob) {
                const PoiIndex mid = pick(succ(cur), rng);
                next = pick(succ(mid), rng);
                if (next == cur) next = -1;
              }
              if (next < 0) {
                const double b = uniform01(rng);
                const auto& out = succ(cur);
                const std::size_t idx = out.size() == 1 ? 0 : (b < 0.6 ? 0 : (b < 0.9 || out.size() == 2 ? 1 : 2 + static_cast<std::size_t>(rng() % (out.size() - 2))));
                next = out[idx];
              }
              if (!after_cut && withheld.count({cur, next})) next = succ(cur)[0];
            }
            if (times[i - 1] <= world.cut_time) train_edges.insert({cur, next});
            cur = next;
          } else if (prev >= 0 && withheld.count({prev, cur}) && times[0] <= world.cut_time) {
            cur = succ(prev)[0];
          }
          CheckIn c;
          c.user_id = SyntheticWorld::user_id(u);
          c.poi_id = SyntheticWorld::poi_id(cur);
          c.category_id = "cat_" + std::to_string(cur % spec.num_categories);
          c.lat = coords[static_cast<std::size_t>(cur)].first;
          c.lon = coords[static_cast<std::size_t>(cur)].second;
          c.timestamp = times[i];
          world.checkins.push_back(std::move(c));
        }
        prev = cur;
      }
    }

    const PlantedTriple* missing = nullptr;
    for (const auto& t : world.triples)
      if (!train_edges.count({t.source, t.via}) || !train_edges.count({t.via, t.target})) {
        missing = &t;
        break;
      }
    if (!missing) break;
    if (attempt == kWalkAttempts)
      throw InfeasibleSpecError("infeasible synthetic spec: planted path " + SyntheticWorld::poi_id(missing->source) +
                                " -> " + SyntheticWorld::poi_id(missing->via) + " -> " +
                                SyntheticWorld::poi_id(missing->target) + " never occurs before the cut in " +
                                std::to_string(kWalkAttempts) + " attempts");
  }
  return world;
}

nlohmann::json SyntheticWorld::sidecar(const SyntheticWorldSpec& spec) const {
  nlohmann::json j;
  j["spec"] = spec_to_json(spec);
  j["cut_time"] = cut_time;
  nlohmann::json pairs = nlohmann::json::array(), triples_j = nlohmann::json::array();
  for (const auto& t : triples) {
    pairs.push_back({poi_id(t.source), poi_id(t.target)});
    triples_j.push_back({poi_id(t.source), poi_id(t.via), poi_id(t.target)});
  }
  j["withheld_pairs"] = pairs;
  j["planted_triples"] = triples_j;
  nlohmann::json graph = nlohmann::json::object();
  for (std::size_t p = 0; p < successors.size(); ++p) {
    nlohmann::json out = nlohmann::json::array();
    for (PoiIndex q : successors[p]) out.push_back(poi_id(q));
    graph[poi_id(static_cast<PoiIndex>(p))] = out;
  }
  j["successors"] = graph;
  return j;
}

void write_checkins(const std::vector<CheckIn>& checkins, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  char buf[64];
  for (const auto& c : checkins) {
    std::snprintf(buf, sizeof buf, "\t%.6f\t%.6f\t", c.lat, c.lon);
    out << c.user_id << '\t' << c.poi_id << '\t' << c.category_id << buf << c.timestamp << '\n';
  }
}

nlohmann::json spec_to_json(const SyntheticWorldSpec& s) {
  return {
      {"num_users", s.num_users},
      {"num_pois", s.num_pois},
      {"num_checkins", s.num_checkins},
      {"num_categories", s.num_categories},
      {"out_degree", s.out_degree},
      {"num_withheld", s.num_withheld},
      {"skip_prob", s.skip_prob},
      {"revisit_min", s.revisit_min},
      {"revisit_max", s.revisit_max},
      {"favorites", s.favorites},
      {"favorite_drift", s.favorite_drift},
      {"shortcut_prob", s.shortcut_prob},
      {"shortcut_prob_final", s.shortcut_prob_final},
      {"session_min", s.session_min},
      {"session_max", s.session_max},
      {"train_ratio", s.train_ratio},
      {"start_time", s.start_time},
      {"seed", s.seed},
  };
}

SyntheticWorldSpec spec_from_json(const nlohmann::json& j) {
  SyntheticWorldSpec s;
  const nlohmann::json defaults = spec_to_json(s);
  for (const auto& [key, value] : j.items())
    if (!defaults.contains(key)) throw InfeasibleSpecError("unknown synthetic spec key '" + key + "'");
  nlohmann::json merged = defaults;
  merged.update(j);
  try {
    s.num_users = merged.at("num_users").get<int>();
    s.num_pois = merged.at("num_pois").get<int>();
    s.num_checkins = merged.at("num_checkins").get<int>();
    s.num_categories = merged.at("num_categories").get<int>();
    s.out_degree = merged.at("out_degree").get<int>();
    s.num_withheld = merged.at("num_withheld").get<int>();
    s.skip_prob = merged.at("skip_prob").get<double>();
    s.revisit_min = merged.at("revisit_min").get<double>();
    s.revisit_max = merged.at("revisit_max").get<double>();
    s.favorites = merged.at("favorites").get<int>();
    s.favorite_drift = merged.at("favorite_drift").get<double>();
    s.shortcut_prob = merged.at("shortcut_prob").get<double>();
    s.shortcut_prob_final = merged.at("shortcut_prob_final").get<double>();
    s.session_min = merged.at("session_min").get<int>();
    s.session_max = merged.at("session_max").get<int>();
    s.train_ratio = merged.at("train_ratio").get<double>();
    s.start_time = merged.at("start_time").get<std::int64_t>();
    s.seed = merged.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw InfeasibleSpecError(std::string("malformed synthetic spec: ") + e.what());
  }
  return s;
}

}  // namespace recap
