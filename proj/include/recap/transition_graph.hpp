// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "recap/autograd.hpp"
#include "recap/dataset.hpp"

namespace recap {

using Transition = std::pair<PoiIndex, PoiIndex>;

/// Sparse training transition counts m_sd.
class TransitionStore {
 public:
  explicit TransitionStore(PoiIndex num_pois = 0);

  void add(PoiIndex source, PoiIndex dest, std::int64_t count = 1);
  std::int64_t count(PoiIndex source, PoiIndex dest) const;
  std::int64_t out_mass(PoiIndex source) const { return out_mass_.at(source); }
  /// Warm (head) transitions are those seen at least twice.
  bool is_warm(PoiIndex source, PoiIndex dest) const { return count(source, dest) >= 2; }
  const std::map<PoiIndex, std::int64_t>& row(PoiIndex source) const { return rows_.at(source); }

  PoiIndex num_pois() const { return static_cast<PoiIndex>(rows_.size()); }
  std::size_t num_edges() const;
  std::vector<Transition> warm_edges() const;

 private:
  std::vector<std::map<PoiIndex, std::int64_t>> rows_;
  std::vector<std::int64_t> out_mass_;
};

/// Counts consecutive training pairs. By default only pairs inside one
/// trajectory count; `cross_trajectory` also counts pairs across time gaps
/// (still within the training split).
TransitionStore count_transitions(std::span<const UserSequence> sequences, PoiIndex num_pois,
                                  bool cross_trajectory = false);
TransitionStore count_transitions(std::span<const std::vector<PoiIndex>> trajectories,
                                  PoiIndex num_pois);

/// Row-normalised adjacency. Rows with no outgoing mass stay zero.
struct TransitionMatrix {
  std::shared_ptr<const ag::SparseMatrix> adjacency;

  ag::Index size() const { return adjacency ? adjacency->rows() : 0; }
};

TransitionMatrix normalize(const TransitionStore& store);

/// G <- A * G, `hops` times.
ag::Matrix propagate(const ag::Matrix& embeddings, const TransitionMatrix& matrix, int hops);
/// Differentiable variant; gradients reach the embedding table.
ag::Var propagate(const ag::Var& embeddings, const TransitionMatrix& matrix, int hops);

/// Cumulative N-hop candidate set: union of destinations of walks of length
/// 1..hops from `source`, sorted ascending.
std::vector<PoiIndex> hop_candidates(const TransitionStore& store, PoiIndex source, int hops);

struct HopRecord {
  int hops = 0;
  double avg_candidates = 0.0;     // M_N / number of distinct sources
  std::size_t covered = 0;         // S_N
  std::size_t candidates = 0;      // M_N
  double coverage = 0.0;           // S_N / |unseen|
  double snr = 0.0;                // S_N / (M_N - S_N)
  bool snr_infinite = false;       // M_N == S_N
};

struct HopAnalysis {
  std::size_t unseen = 0;
  std::size_t sources = 0;
  std::vector<HopRecord> records;
};

/// Coverage / SNR of unseen transitions under cumulative N-hop candidate
/// sets. Duplicate pairs in `unseen` are counted once.
HopAnalysis coverage_snr(std::span<const Transition> unseen, const TransitionStore& store,
                         std::span<const int> hop_values);

}  // namespace recap
