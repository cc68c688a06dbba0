// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "recap/autograd.hpp"
#include "recap/dataset.hpp"
#include "recap/nn.hpp"
#include "recap/revisit.hpp"
#include "recap/transition_graph.hpp"

namespace recap {

struct ModelConfig {
  int k = 10;
  ag::Index poi_dim = 128;
  ag::Index category_dim = 32;
  ag::Index hidden = 256;
  ag::Index ffn = 512;
  int layers = 2;
  int heads = 4;
  double dropout = 0.1;
  double embedding_dropout = 0.3;
  double output_dropout = 0.2;

  int graph_hops = 2;
  ag::Index graph_hidden = 256;
  double graph_dropout = 0.1;
  bool use_graph = true;
  bool use_history = true;

  int candidate_cap = 256;
  int window = 10;
  ag::Index calibration_hidden = 128;
  ag::Index time_dim = 8;
  double b_max = 5.0;
  double revisit_init = 0.1;
};

/// Which components are live for a forward pass.
struct StageFlags {
  double graph_scale = 1.0;  // 0 substitutes the zero graph token
  bool prior_active = true;
  bool corr_active = true;
};

/// Non-owning view of a mini-batch. `stats` may be empty when the history
/// branch is not evaluated.
struct Batch {
  std::vector<const PredictionInstance*> instances;
  std::vector<const RevisitStats*> stats;

  std::size_t size() const { return instances.size(); }
};

/// Flattened revisit candidates of a batch.
struct CandidateTable {
  std::vector<ag::Index> row;  // batch row of each candidate
  std::vector<ag::Index> poi;
  Eigen::VectorXd log_count;
  Eigen::VectorXd recency;
  Eigen::VectorXd in_window;
  std::vector<ag::Index> last_hour;
  std::vector<ag::Index> last_dow;
  ag::Matrix pair;  // C x 3 pair features

  std::size_t size() const { return row.size(); }
};

CandidateTable build_candidate_table(const Batch& batch, std::span<const std::size_t> rows);

struct RevisitOutput {
  ag::Var prior;       // C x 1, R_t(d)
  ag::Var gate;        // C x 1, gamma_t(d); undefined when calibration is off
  ag::Var correction;  // C x 1, Delta_t(d); undefined when calibration is off
  ag::Var adjustment;  // C x 1, R + Delta
};

struct ForwardOutput {
  ag::Var hidden;        // B x H, h_t
  ag::Var core_logits;   // B x |P|
  ag::Var final_logits;  // B x |P|
  CandidateTable candidates;
  RevisitOutput revisit;  // undefined members when the branch is off
  bool history_applied = false;
};

class RecapModel {
 public:
  RecapModel(const ModelConfig& config, const Vocabulary& vocab, TransitionMatrix transitions,
             std::uint64_t seed);

  ForwardOutput forward(const Batch& batch, const StageFlags& flags, bool training,
                        std::mt19937_64& rng) const;

  /// Detached core logits plus the revisit adjustment recomputed on detached
  /// backbone inputs, for the rows in `rows`.
  ag::Var warm_logits(const ForwardOutput& out, const Batch& batch,
                      std::span<const std::size_t> rows, const StageFlags& flags) const;

  // Individual stages, exposed for testing.
  ag::Var tokenize(const Batch& batch, bool training, std::mt19937_64& rng) const;
  ag::Var propagated() const;
  ag::Var graph_tokens(const Batch& batch, bool training, std::mt19937_64& rng) const;
  ag::Var encode(const Batch& batch, const ag::Var& tokens, const ag::Var& graph_tokens,
                 bool training, std::mt19937_64& rng) const;
  ag::Var core_score(const ag::Var& hidden, bool training, std::mt19937_64& rng) const;
  RevisitOutput revisit(const ag::Var& hidden, const Batch& batch, const CandidateTable& table,
                        bool calibrate, bool detach_backbone) const;

  std::vector<std::uint8_t> key_mask(const Batch& batch) const;
  ag::Index sequence_length() const { return config_.k + 2; }

  const ModelConfig& config() const { return config_; }
  nn::ParameterStore& parameters() { return params_; }
  const nn::ParameterStore& parameters() const { return params_; }
  PoiIndex num_pois() const { return num_pois_; }
  RevisitWeights revisit_weights() const;

 private:
  ModelConfig config_;
  PoiIndex num_pois_ = 0;
  UserIndex num_users_ = 0;
  std::vector<ag::Index> poi_category_;  // pad maps to the pad category row
  ag::Matrix poi_coords_;                // (|P|+1) x 2, standardized, pad row zero
  TransitionMatrix transitions_;
  std::vector<ag::Index> real_rows_;     // 0..|P|-1

  nn::ParameterStore params_;
  // backbone group
  ag::Var poi_embedding_;       // (|P|+1) x poi_dim
  ag::Var category_embedding_;  // (|C|+1) x category_dim
  ag::Var user_embedding_;      // |U| x hidden
  nn::Mlp token_mlp_;
  ag::Var positional_;          // (k+2) x hidden
  nn::TransformerEncoder encoder_;
  nn::Mlp graph_mlp_;
  nn::LayerNorm graph_norm_;
  ag::Var output_weight_;       // |P| x hidden
  ag::Var output_bias_;         // 1 x |P|
  // revisit group
  ag::Var lambda_prior_;
  ag::Var revisit_weights_;     // 3 x 1: w_cnt, w_rec, w_win
  ag::Var log_tau_;
  ag::Var lambda_corr_;
  ag::Var tod_embedding_;       // 24 x time_dim
  ag::Var dow_embedding_;       // 7 x time_dim
  nn::Mlp hist_mlp_, query_mlp_, cand_mlp_, gate_mlp_;
};

/// Query time features: sin/cos of time-of-day and one-hot day-of-week.
ag::Matrix query_time_features(std::span<const std::int64_t> query_times);

}  // namespace recap
