// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "recap/dataset.hpp"
#include "recap/transition_graph.hpp"

namespace recap {

/// 1 + #{strictly greater logits} + #{equal logits at a smaller index}.
std::size_t rank_target(std::span<const double> logits, PoiIndex target);

struct CutoffMetrics {
  double hr = 0.0;
  double ndcg = 0.0;
  double mrr = 0.0;
  bool empty = true;
};

/// HR@K, single-relevant NDCG@K and MRR over 1-based ranks.
CutoffMetrics metrics(std::span<const std::size_t> ranks, int cutoff);

inline constexpr std::array<int, 4> kReportCutoffs = {1, 5, 10, 20};

struct MetricSummary {
  std::size_t count = 0;
  std::map<int, double> hr;
  std::map<int, double> ndcg;
  double mrr = 0.0;

  bool empty() const { return count == 0; }
};

MetricSummary summarize(std::span<const std::size_t> ranks);
MetricSummary summarize_subset(std::span<const std::size_t> ranks, std::span<const std::size_t> rows);

struct HeadTailSplit {
  std::vector<std::size_t> head;
  std::vector<std::size_t> tail;
  std::vector<std::size_t> unseen;  // subset of tail with m = 0
};

/// Tail iff m(source, target) <= eta.
HeadTailSplit head_tail_split(std::span<const PredictionInstance> instances,
                              const TransitionStore& store, int eta = 1);

inline constexpr int kFrequencyBins = 11;  // m = 0..9 and 10+

struct FrequencyBin {
  std::string label;
  std::size_t count = 0;
  std::optional<double> hr1;
  std::optional<double> hr20;
};

int frequency_bin(std::int64_t m);
std::vector<FrequencyBin> frequency_bin_report(std::span<const PredictionInstance> instances,
                                               const TransitionStore& store,
                                               std::span<const std::size_t> ranks);

struct TailShare {
  std::size_t unique_pairs = 0;
  std::size_t unique_tail_pairs = 0;
  std::size_t unique_unseen_pairs = 0;
  std::size_t instances = 0;
  std::size_t tail_instances = 0;
  std::size_t unseen_instances = 0;

  double unique_tail_fraction() const;
  double instance_tail_fraction() const;
};

TailShare tail_share(std::span<const PredictionInstance> instances, const TransitionStore& store,
                     int eta = 1);

struct EvalReport {
  int eta = 1;
  MetricSummary overall;
  MetricSummary head;
  MetricSummary tail;
  MetricSummary unseen;
  TailShare share;
  std::vector<FrequencyBin> bins;
};

EvalReport build_report(std::span<const PredictionInstance> instances, const TransitionStore& store,
                        std::span<const std::size_t> ranks, int eta = 1);

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);
/// Aligned text tables: overall, head/tail, frequency bins.
std::string report_to_text(const EvalReport& report);
/// bin,count,hr1,hr20 rows; empty metrics left blank.
std::string bins_to_csv(const EvalReport& report);

}  // namespace recap
