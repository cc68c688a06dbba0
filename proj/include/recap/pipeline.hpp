// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "recap/config.hpp"
#include "recap/dataset.hpp"
#include "recap/evaluation.hpp"
#include "recap/training.hpp"
#include "recap/transition_graph.hpp"

namespace recap {

class FingerprintMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Transition counts over the training split of a store.
TransitionStore training_transitions(const InstanceStore& store, bool cross_trajectory = false);

/// Users, POIs, check-ins, instances, drop counts and test tail share.
nlohmann::json dataset_summary_json(const InstanceStore& store, int eta, bool cross_trajectory = false);

/// Loads raw check-ins, builds the store and writes it with summary.json and
/// the resolved config. Loader warnings go to `log`.
nlohmann::json run_preprocess(const RunConfig& config, std::ostream& log);

struct TrainOutcome {
  FitResult fit;
  std::string fingerprint;
  std::filesystem::path checkpoint;
};

/// Trains on the store named by the config; writes model.ckpt,
/// train_log.jsonl and config.json into the output directory.
TrainOutcome run_train(const RunConfig& config, std::ostream& log);

nlohmann::json epoch_record_json(const EpochRecord& r);

struct EvalOutcome {
  EvalReport report;
  std::vector<std::size_t> ranks;
};

/// Evaluates a checkpoint on the test split (or validation with
/// `split == Split::kVal`). Throws FingerprintMismatch when the checkpoint
/// was trained with an incompatible architecture or vocabulary.
EvalOutcome run_evaluate(const RunConfig& config, const std::filesystem::path& checkpoint, Split split,
                         std::ostream& log);

/// Coverage/SNR of unseen test transitions for 1..max_hops.
nlohmann::json run_analyze_hops(const RunConfig& config, int max_hops, std::ostream& log);

/// Mean and sample standard deviation of every numeric metric across reports.
nlohmann::json aggregate_reports(const std::vector<nlohmann::json>& reports);

}  // namespace recap
