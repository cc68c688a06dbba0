// SPDX-License-Identifier: Apache-2.0
#include "recap/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "recap/evaluation.hpp"

namespace recap {

void TrainingConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("training config: " + msg); };
  if (epochs < 1) fail("epochs must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(learning_rate > 0)) fail("learning_rate must be positive");
  if (weight_decay < 0) fail("weight_decay must be non-negative");
  if (!(1 <= e_graph && e_graph <= e_prior && e_prior <= e_corr && e_corr <= e_warm &&
        e_warm <= epochs))
    fail("activation epochs must satisfy 1 <= e_graph <= e_prior <= e_corr <= e_warm <= epochs");
  if (graph_ramp < 0 || warm_ramp < 0) fail("ramps must be non-negative");
  if (warm_max < 0) fail("warm_max must be non-negative");
  if (!(backbone_lr_scale > 0)) fail("backbone_lr_scale must be positive");
  if (grad_clip < 0) fail("grad_clip must be non-negative");
}

namespace {

double linear_ramp(int epoch, int start, int length) {
  if (epoch < start) return 0.0;
  if (length <= 0) return 1.0;
  return std::min(1.0, static_cast<double>(epoch - start) / static_cast<double>(length));
}

}  // namespace

double warm_weight(int epoch, const TrainingConfig& config) {
  return config.warm_max * linear_ramp(epoch, config.e_warm, config.warm_ramp);
}

CurriculumState curriculum_state(int epoch, const TrainingConfig& config) {
  CurriculumState s;
  s.graph_scale = linear_ramp(epoch, config.e_graph, config.graph_ramp);
  s.prior_active = epoch >= config.e_prior;
  s.corr_active = epoch >= config.e_corr;
  s.warm_active = epoch >= config.e_warm;
  s.warm_weight = warm_weight(epoch, config);
  s.backbone_lr_scale = s.corr_active ? config.backbone_lr_scale : 1.0;
  return s;
}

ag::Var main_loss(const ag::Var& final_logits, std::span<const ag::Index> targets) {
  for (ag::Index t : targets)
    if (t < 0 || t >= final_logits.cols())
      throw std::logic_error("main_loss: target " + std::to_string(t) +
                             " is padding or outside the POI vocabulary");
  return ag::cross_entropy(final_logits, targets);
}

ag::Var warm_loss(const ag::Var& warm_logits, std::span<const ag::Index> warm_targets) {
  if (warm_targets.empty()) return ag::constant(ag::Matrix::Zero(1, 1));
  return main_loss(warm_logits, warm_targets);
}

ag::Var total_loss(const ag::Var& main, const ag::Var& warm, int epoch, const TrainingConfig& config) {
  const double w = warm_weight(epoch, config);
  if (!warm.defined() || w == 0.0) return main;
  return ag::add(main, ag::scale(warm, w));
}

std::vector<std::size_t> warm_view(const Batch& batch, const TransitionStore& store) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto* inst = batch.instances[i];
    if (store.is_warm(inst->source, inst->target)) rows.push_back(i);
  }
  return rows;
}

std::vector<RevisitStats> compute_instance_stats(const InstanceStore& store,
                                                 std::span<const PredictionInstance> instances,
                                                 int window, int cap) {
  std::vector<RevisitStats> out;
  out.reserve(instances.size());
  for (const auto& inst : instances) {
    const auto& seq = store.sequence(inst.user).checkins;
    out.push_back(compute_history_stats(seq, inst.step, window, cap));
  }
  return out;
}

// ---------------------------------------------------------------------------

AdamOptimizer::AdamOptimizer(nn::ParameterStore& params, const TrainingConfig& config)
    : params_(params), config_(config) {
  for (const auto& p : params_.all()) {
    m_.push_back(ag::Matrix::Zero(p.var.rows(), p.var.cols()));
    v_.push_back(ag::Matrix::Zero(p.var.rows(), p.var.cols()));
  }
}

double AdamOptimizer::step(double backbone_lr_scale) {
  auto& all = params_.all();
  double sq = 0.0;
  for (const auto& p : all)
    if (p.var.has_grad()) sq += p.var.grad().squaredNorm();
  const double norm = std::sqrt(sq);
  const double clip = (config_.grad_clip > 0 && norm > config_.grad_clip) ? config_.grad_clip / norm : 1.0;

  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < all.size(); ++i) {
    auto& p = all[i];
    if (!p.var.has_grad()) continue;
    ag::Matrix& value = p.var.mutable_value();
    ag::Matrix g = p.var.grad() * clip + config_.weight_decay * value;
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g.cwiseProduct(g);
    const double lr = config_.learning_rate *
                      (p.group == nn::ParamGroup::kBackbone ? backbone_lr_scale : 1.0);
    value.array() -= lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + config_.adam_eps);
  }
  return norm;
}

NonFiniteLossError::NonFiniteLossError(int epoch, int last_good_epoch)
    : std::runtime_error("non-finite loss in epoch " + std::to_string(epoch) +
                         " (last good epoch: " + std::to_string(last_good_epoch) + ")"),
      epoch_(epoch),
      last_good_epoch_(last_good_epoch) {}

std::vector<ag::Matrix> snapshot_parameters(const nn::ParameterStore& params) {
  std::vector<ag::Matrix> out;
  for (const auto& p : params.all()) out.push_back(p.var.value());
  return out;
}

void load_parameters(nn::ParameterStore& params, const std::vector<ag::Matrix>& values) {
  auto& all = params.all();
  if (values.size() != all.size()) throw std::invalid_argument("load_parameters: count mismatch");
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (values[i].rows() != all[i].var.rows() || values[i].cols() != all[i].var.cols())
      throw std::invalid_argument("load_parameters: shape mismatch for " + all[i].name);
    all[i].var.mutable_value() = values[i];
  }
}

std::vector<std::size_t> rank_instances(const RecapModel& model,
                                        std::span<const PredictionInstance> instances,
                                        std::span<const RevisitStats> stats,
                                        const StageFlags& flags, int batch_size) {
  ag::NoGradGuard no_grad;
  std::mt19937_64 unused(0);
  std::vector<std::size_t> ranks;
  ranks.reserve(instances.size());
  const bool with_stats = !stats.empty();
  for (std::size_t start = 0; start < instances.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(instances.size(), start + static_cast<std::size_t>(batch_size));
    Batch batch;
    for (std::size_t i = start; i < end; ++i) {
      batch.instances.push_back(&instances[i]);
      if (with_stats) batch.stats.push_back(&stats[i]);
    }
    StageFlags f = flags;
    if (!with_stats) f.prior_active = f.corr_active = false;
    const ForwardOutput out = model.forward(batch, f, false, unused);
    const ag::Matrix& logits = out.final_logits.value();
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto row = logits.row(static_cast<ag::Index>(b));
      ranks.push_back(rank_target(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())),
                                  batch.instances[b]->target));
    }
  }
  return ranks;
}

FitResult fit(RecapModel& model, const InstanceStore& store, const TransitionStore& transitions,
              const TrainingConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  const auto& mc = model.config();
  const bool history = mc.use_history;
  std::vector<RevisitStats> train_stats, val_stats;
  if (history) {
    train_stats = compute_instance_stats(store, store.train, mc.window, mc.candidate_cap);
    val_stats = compute_instance_stats(store, store.val, mc.window, mc.candidate_cap);
  }

  AdamOptimizer optimizer(model.parameters(), config);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(store.train.size());
  std::iota(order.begin(), order.end(), 0);

  FitResult result;
  int last_good = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const CurriculumState cs = curriculum_state(epoch, config);
    const StageFlags flags = cs.flags();
    std::shuffle(order.begin(), order.end(), rng);

    double main_sum = 0.0, warm_sum = 0.0;
    std::size_t main_n = 0, warm_n = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      Batch batch;
      std::vector<ag::Index> targets;
      for (std::size_t i = start; i < end; ++i) {
        batch.instances.push_back(&store.train[order[i]]);
        if (history) batch.stats.push_back(&train_stats[order[i]]);
        targets.push_back(store.train[order[i]].target);
      }
      const ForwardOutput out = model.forward(batch, flags, true, rng);
      ag::Var l_main = main_loss(out.final_logits, targets);
      ag::Var l_warm;
      if (cs.warm_active && config.use_warm && out.history_applied) {
        const auto rows = warm_view(batch, transitions);
        if (!rows.empty()) {
          std::vector<ag::Index> warm_targets;
          for (std::size_t r : rows) warm_targets.push_back(targets[r]);
          l_warm = warm_loss(model.warm_logits(out, batch, rows, flags), warm_targets);
          warm_sum += l_warm.scalar() * static_cast<double>(rows.size());
          warm_n += rows.size();
        }
      }
      ag::Var loss = total_loss(l_main, l_warm, epoch, config);
      if (!std::isfinite(loss.scalar())) throw NonFiniteLossError(epoch, last_good);
      main_sum += l_main.scalar() * static_cast<double>(batch.size());
      main_n += batch.size();

      model.parameters().zero_grad();
      ag::backward(loss);
      optimizer.step(cs.backbone_lr_scale);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.main_loss = main_n ? main_sum / static_cast<double>(main_n) : 0.0;
    rec.warm_applied = warm_n > 0;
    rec.warm_loss = warm_n ? warm_sum / static_cast<double>(warm_n) : 0.0;
    rec.warm_weight = cs.warm_weight;
    rec.graph_scale = cs.graph_scale;
    rec.prior_active = cs.prior_active;
    rec.corr_active = cs.corr_active;
    rec.backbone_lr_scale = cs.backbone_lr_scale;

    const auto ranks = rank_instances(model, store.val, val_stats, flags);
    const MetricSummary val = summarize(ranks);
    rec.val_hr1 = val.empty() ? 0.0 : val.hr.at(1);
    rec.val_hr20 = val.empty() ? 0.0 : val.hr.at(20);
    rec.val_mrr = val.mrr;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    last_good = epoch;

    if (rec.val_mrr > result.best_val_mrr) {
      result.best_val_mrr = rec.val_mrr;
      result.best_epoch = epoch;
      result.best_parameters = snapshot_parameters(model.parameters());
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  load_parameters(model.parameters(), result.best_parameters);
  return result;
}

}  // namespace recap
