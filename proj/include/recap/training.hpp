// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "recap/autograd.hpp"
#include "recap/dataset.hpp"
#include "recap/model.hpp"
#include "recap/revisit.hpp"
#include "recap/transition_graph.hpp"

namespace recap {

struct TrainingConfig {
  int epochs = 130;
  int batch_size = 512;
  double learning_rate = 3e-5;
  double weight_decay = 5e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  int e_graph = 60;
  int graph_ramp = 20;
  int e_prior = 80;
  int e_corr = 120;
  int e_warm = 120;
  double warm_max = 0.5;
  int warm_ramp = 10;
  double backbone_lr_scale = 0.1;
  double grad_clip = 5.0;  // global norm; 0 disables
  bool use_warm = true;

  std::uint64_t seed = 42;

  /// Throws std::invalid_argument unless 1 <= e_graph <= e_prior <= e_corr
  /// <= e_warm <= epochs and the numeric fields are in range.
  void validate() const;
};

struct CurriculumState {
  double graph_scale = 0.0;
  bool prior_active = false;
  bool corr_active = false;
  bool warm_active = false;
  double warm_weight = 0.0;
  double backbone_lr_scale = 1.0;

  StageFlags flags() const { return {graph_scale, prior_active, corr_active}; }
};

/// Stage flags for epoch `epoch` (1-based).
CurriculumState curriculum_state(int epoch, const TrainingConfig& config);
/// 0 before e_warm, then linear to warm_max over warm_ramp epochs.
double warm_weight(int epoch, const TrainingConfig& config);

/// Mean cross-entropy of the final logits. Pad or out-of-range targets are a
/// construction bug and throw std::logic_error.
ag::Var main_loss(const ag::Var& final_logits, std::span<const ag::Index> targets);
/// Mean cross-entropy over the warm rows; `warm_logits` holds one row per
/// warm instance.
ag::Var warm_loss(const ag::Var& warm_logits, std::span<const ag::Index> warm_targets);
/// L_main + lambda_warm(e) * L_warm. An undefined `warm` contributes nothing.
ag::Var total_loss(const ag::Var& main, const ag::Var& warm, int epoch, const TrainingConfig& config);

/// Batch rows whose (source, target) is a warm transition.
std::vector<std::size_t> warm_view(const Batch& batch, const TransitionStore& store);

/// Revisit statistics for every instance, aligned with `instances`.
std::vector<RevisitStats> compute_instance_stats(const InstanceStore& store,
                                                 std::span<const PredictionInstance> instances,
                                                 int window, int cap);

/// Adam with L2 weight decay and per-group learning-rate scaling.
class AdamOptimizer {
 public:
  AdamOptimizer(nn::ParameterStore& params, const TrainingConfig& config);

  /// Applies one update from the accumulated gradients. Returns the global
  /// gradient norm before clipping.
  double step(double backbone_lr_scale);

 private:
  nn::ParameterStore& params_;
  TrainingConfig config_;
  std::vector<ag::Matrix> m_, v_;
  std::int64_t t_ = 0;
};

struct EpochRecord {
  int epoch = 0;
  double main_loss = 0.0;
  double warm_loss = 0.0;
  bool warm_applied = false;
  double warm_weight = 0.0;
  double graph_scale = 0.0;
  bool prior_active = false;
  bool corr_active = false;
  double backbone_lr_scale = 1.0;
  double val_hr1 = 0.0;
  double val_hr20 = 0.0;
  double val_mrr = 0.0;
  double seconds = 0.0;
};

class NonFiniteLossError : public std::runtime_error {
 public:
  NonFiniteLossError(int epoch, int last_good_epoch);
  int epoch() const { return epoch_; }
  int last_good_epoch() const { return last_good_epoch_; }

 private:
  int epoch_;
  int last_good_epoch_;
};

struct FitResult {
  std::vector<ag::Matrix> best_parameters;  // in ParameterStore order
  int best_epoch = 0;
  double best_val_mrr = -1.0;
  std::vector<EpochRecord> history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Staged training loop. The model is left holding the best validation
/// parameters on return.
FitResult fit(RecapModel& model, const InstanceStore& store, const TransitionStore& transitions,
              const TrainingConfig& config, const EpochCallback& on_epoch = {});

/// 1-based rank of each instance's target under the final logits.
std::vector<std::size_t> rank_instances(const RecapModel& model,
                                        std::span<const PredictionInstance> instances,
                                        std::span<const RevisitStats> stats,
                                        const StageFlags& flags, int batch_size = 512);

void load_parameters(nn::ParameterStore& params, const std::vector<ag::Matrix>& values);
std::vector<ag::Matrix> snapshot_parameters(const nn::ParameterStore& params);

}  // namespace recap
