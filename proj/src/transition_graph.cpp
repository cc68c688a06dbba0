// SPDX-License-Identifier: Apache-2.0
#include "recap/transition_graph.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace recap {

TransitionStore::TransitionStore(PoiIndex num_pois)
    : rows_(static_cast<std::size_t>(num_pois)), out_mass_(static_cast<std::size_t>(num_pois), 0) {}

void TransitionStore::add(PoiIndex source, PoiIndex dest, std::int64_t count) {
  if (source < 0 || dest < 0 || source >= num_pois() || dest >= num_pois())
    throw std::out_of_range("TransitionStore::add: POI index out of range");
  if (count <= 0) return;
  rows_[source][dest] += count;
  out_mass_[source] += count;
}

std::int64_t TransitionStore::count(PoiIndex source, PoiIndex dest) const {
  if (source < 0 || source >= num_pois()) return 0;
  const auto& r = rows_[source];
  auto it = r.find(dest);
  return it == r.end() ? 0 : it->second;
}

std::size_t TransitionStore::num_edges() const {
  std::size_t n = 0;
  for (const auto& r : rows_) n += r.size();
  return n;
}

std::vector<Transition> TransitionStore::warm_edges() const {
  std::vector<Transition> out;
  for (PoiIndex s = 0; s < num_pois(); ++s)
    for (const auto& [d, m] : rows_[s])
      if (m >= 2) out.emplace_back(s, d);
  return out;
}

TransitionStore count_transitions(std::span<const UserSequence> sequences, PoiIndex num_pois,
                                  bool cross_trajectory) {
  TransitionStore store(num_pois);
  for (const auto& seq : sequences) {
    if (cross_trajectory) {
      const auto& c = seq.checkins;
      for (std::size_t i = 1; i < c.size(); ++i) {
        if (c[i - 1].split != Split::kTrain || c[i].split != Split::kTrain) continue;
        if (c[i - 1].poi == kUnknownPoi || c[i].poi == kUnknownPoi) continue;
        store.add(c[i - 1].poi, c[i].poi);
      }
      continue;
    }
    for (const Range& r : trajectories(seq)) {
      if (seq.checkins[r.begin].split != Split::kTrain) continue;
      for (std::size_t i = r.begin + 1; i < r.end; ++i) {
        const PoiIndex s = seq.checkins[i - 1].poi;
        const PoiIndex d = seq.checkins[i].poi;
        if (s == kUnknownPoi || d == kUnknownPoi) continue;
        store.add(s, d);
      }
    }
  }
  return store;
}

TransitionStore count_transitions(std::span<const std::vector<PoiIndex>> trajectories,
                                  PoiIndex num_pois) {
  TransitionStore store(num_pois);
  for (const auto& t : trajectories)
    for (std::size_t i = 1; i < t.size(); ++i) store.add(t[i - 1], t[i]);
  return store;
}

TransitionMatrix normalize(const TransitionStore& store) {
  const PoiIndex n = store.num_pois();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(store.num_edges());
  for (PoiIndex s = 0; s < n; ++s) {
    const double mass = static_cast<double>(store.out_mass(s));
    if (mass <= 0) continue;
    for (const auto& [d, m] : store.row(s)) triplets.emplace_back(s, d, static_cast<double>(m) / mass);
  }
  auto a = std::make_shared<ag::SparseMatrix>(n, n);
  a->setFromTriplets(triplets.begin(), triplets.end());
  a->makeCompressed();
  return {std::move(a)};
}

ag::Matrix propagate(const ag::Matrix& embeddings, const TransitionMatrix& matrix, int hops) {
  if (hops < 0) throw std::invalid_argument("propagate: hops must be non-negative");
  if (embeddings.rows() != matrix.size())
    throw std::invalid_argument("propagate: embedding rows (" + std::to_string(embeddings.rows()) +
                                ") != POI count (" + std::to_string(matrix.size()) + ")");
  ag::Matrix g = embeddings;
  for (int h = 0; h < hops; ++h) g = (*matrix.adjacency) * g;
  return g;
}

ag::Var propagate(const ag::Var& embeddings, const TransitionMatrix& matrix, int hops) {
  if (hops < 0) throw std::invalid_argument("propagate: hops must be non-negative");
  if (embeddings.rows() != matrix.size())
    throw std::invalid_argument("propagate: embedding rows (" + std::to_string(embeddings.rows()) +
                                ") != POI count (" + std::to_string(matrix.size()) + ")");
  ag::Var g = embeddings;
  for (int h = 0; h < hops; ++h) g = ag::sparse_left_multiply(matrix.adjacency, g);
  return g;
}

std::vector<PoiIndex> hop_candidates(const TransitionStore& store, PoiIndex source, int hops) {
  if (hops < 1) throw std::invalid_argument("hop_candidates: hops must be >= 1");
  const PoiIndex n = store.num_pois();
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(n), 0);
  std::vector<PoiIndex> frontier{source};
  std::vector<PoiIndex> found;
  // A node first reached at depth l has a walk of length l; nodes already
  // seen at a smaller depth need not be expanded again.
  for (int depth = 1; depth <= hops && !frontier.empty(); ++depth) {
    std::vector<PoiIndex> next;
    for (PoiIndex u : frontier)
      for (const auto& [d, m] : store.row(u)) {
        if (m <= 0 || seen[d]) continue;
        seen[d] = 1;
        found.push_back(d);
        next.push_back(d);
      }
    frontier = std::move(next);
  }
  std::sort(found.begin(), found.end());
  return found;
}

HopAnalysis coverage_snr(std::span<const Transition> unseen, const TransitionStore& store,
                         std::span<const int> hop_values) {
  std::set<Transition> pairs(unseen.begin(), unseen.end());
  std::set<PoiIndex> sources;
  for (const auto& [s, d] : pairs) sources.insert(s);

  HopAnalysis out;
  out.unseen = pairs.size();
  out.sources = sources.size();
  for (int n : hop_values) {
    HopRecord rec;
    rec.hops = n;
    std::map<PoiIndex, std::vector<PoiIndex>> cand;
    for (PoiIndex s : sources) {
      cand[s] = hop_candidates(store, s, n);
      rec.candidates += cand[s].size();
    }
    for (const auto& [s, d] : pairs) {
      const auto& c = cand[s];
      if (std::binary_search(c.begin(), c.end(), d)) ++rec.covered;
    }
    rec.avg_candidates = sources.empty() ? 0.0
                                         : static_cast<double>(rec.candidates) /
                                               static_cast<double>(sources.size());
    rec.coverage = pairs.empty() ? 0.0
                                 : static_cast<double>(rec.covered) / static_cast<double>(pairs.size());
    if (rec.candidates == rec.covered) {
      rec.snr_infinite = true;
      rec.snr = std::numeric_limits<double>::infinity();
    } else {
      rec.snr = static_cast<double>(rec.covered) /
                static_cast<double>(rec.candidates - rec.covered);
    }
    out.records.push_back(rec);
  }
  return out;
}

}  // namespace recap
