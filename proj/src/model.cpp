// SPDX-License-Identifier: Apache-2.0
#include "recap/model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace recap {

using nn::ParamGroup;

CandidateTable build_candidate_table(const Batch& batch, std::span<const std::size_t> rows) {
  CandidateTable t;
  std::size_t total = 0;
  for (std::size_t r : rows) total += batch.stats.at(r)->candidates.size();
  const auto n = static_cast<ag::Index>(total);
  t.row.reserve(total);
  t.poi.reserve(total);
  t.last_hour.reserve(total);
  t.last_dow.reserve(total);
  t.log_count.resize(n);
  t.recency.resize(n);
  t.in_window.resize(n);
  t.pair.resize(n, 3);
  ag::Index at = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t r = rows[i];
    const auto query_time = batch.instances.at(r)->query_time;
    for (const auto& c : batch.stats[r]->candidates) {
      t.row.push_back(static_cast<ag::Index>(i));
      t.poi.push_back(c.poi);
      t.log_count[at] = std::log1p(static_cast<double>(c.count));
      t.recency[at] = static_cast<double>(c.recency);
      t.in_window[at] = c.in_window ? 1.0 : 0.0;
      t.last_hour.push_back(c.last_hour);
      t.last_dow.push_back(c.last_dow);
      const auto psi = pair_features(c, query_time);
      t.pair.row(at) << psi[0], psi[1], psi[2];
      ++at;
    }
  }
  return t;
}

ag::Matrix query_time_features(std::span<const std::int64_t> query_times) {
  ag::Matrix f = ag::Matrix::Zero(static_cast<ag::Index>(query_times.size()), 9);
  for (std::size_t i = 0; i < query_times.size(); ++i) {
    const double angle = 2.0 * std::numbers::pi * time_of_day_fraction(query_times[i]);
    const auto r = static_cast<ag::Index>(i);
    f(r, 0) = std::sin(angle);
    f(r, 1) = std::cos(angle);
    f(r, 2 + day_of_week(query_times[i])) = 1.0;
  }
  return f;
}

RecapModel::RecapModel(const ModelConfig& config, const Vocabulary& vocab,
                       TransitionMatrix transitions, std::uint64_t seed)
    : config_(config),
      num_pois_(vocab.num_pois()),
      num_users_(vocab.num_users()),
      transitions_(std::move(transitions)) {
  if (config.k <= 0 || config.hidden % config.heads != 0)
    throw std::invalid_argument("RecapModel: k must be positive and hidden divisible by heads");
  if (transitions_.size() != num_pois_)
    throw std::invalid_argument("RecapModel: transition matrix size does not match vocabulary");

  const ag::Index pois = num_pois_;
  const ag::Index cats = vocab.num_categories();
  poi_category_.resize(static_cast<std::size_t>(pois + 1));
  poi_coords_ = ag::Matrix::Zero(pois + 1, 2);
  for (ag::Index p = 0; p < pois; ++p) {
    const auto& m = vocab.poi_meta[static_cast<std::size_t>(p)];
    poi_category_[static_cast<std::size_t>(p)] = m.category;
    poi_coords_(p, 0) = (m.lat - vocab.lat_mean) / vocab.lat_std;
    poi_coords_(p, 1) = (m.lon - vocab.lon_mean) / vocab.lon_std;
  }
  poi_category_[static_cast<std::size_t>(pois)] = cats;
  real_rows_.resize(static_cast<std::size_t>(pois));
  for (ag::Index p = 0; p < pois; ++p) real_rows_[static_cast<std::size_t>(p)] = p;

  std::mt19937_64 rng(seed);
  const auto bb = ParamGroup::kBackbone;
  const auto rv = ParamGroup::kRevisit;
  const ag::Index h = config.hidden;

  poi_embedding_ = params_.add("poi_embedding", nn::normal_init(pois + 1, config.poi_dim, 0.1, rng), bb);
  category_embedding_ =
      params_.add("category_embedding", nn::normal_init(cats + 1, config.category_dim, 0.1, rng), bb);
  user_embedding_ = params_.add("user_embedding", nn::normal_init(num_users_, h, 0.1, rng), bb);
  token_mlp_ = nn::make_mlp(params_, "token_mlp", config.poi_dim + config.category_dim + 2, h, h, bb, rng);
  positional_ = params_.add("positional", nn::normal_init(config.k + 2, h, 0.02, rng), bb);
  encoder_ = nn::TransformerEncoder(
      params_, "encoder",
      {.hidden = h, .ffn = config.ffn, .layers = config.layers, .heads = config.heads,
       .dropout = config.dropout},
      rng);
  graph_mlp_ = nn::make_mlp(params_, "graph_mlp", config.poi_dim, config.graph_hidden, h, bb, rng);
  graph_norm_ = nn::make_layer_norm(params_, "graph_norm", h, bb);
  const double bound = 1.0 / std::sqrt(static_cast<double>(h));
  output_weight_ = params_.add("output.weight", nn::uniform_init(pois, h, bound, rng), bb);
  output_bias_ = params_.add("output.bias", ag::Matrix::Zero(1, pois), bb);

  const double init = config.revisit_init;
  lambda_prior_ = params_.add("revisit.lambda_prior", ag::Matrix::Constant(1, 1, init), rv);
  revisit_weights_ = params_.add("revisit.weights", ag::Matrix::Constant(3, 1, init), rv);
  log_tau_ = params_.add("revisit.log_tau", ag::Matrix::Zero(1, 1), rv);
  lambda_corr_ = params_.add("revisit.lambda_corr", ag::Matrix::Zero(1, 1), rv);
  tod_embedding_ = params_.add("revisit.tod_embedding", nn::normal_init(24, config.time_dim, 0.1, rng), rv);
  dow_embedding_ = params_.add("revisit.dow_embedding", nn::normal_init(7, config.time_dim, 0.1, rng), rv);
  const ag::Index c = config.calibration_hidden;
  hist_mlp_ = nn::make_mlp(params_, "revisit.hist_mlp", 3 + 2 * config.time_dim + 3, c, c, rv, rng);
  query_mlp_ = nn::make_mlp(params_, "revisit.query_mlp", h + 9, c, c, rv, rng);
  cand_mlp_ = nn::make_mlp(params_, "revisit.cand_mlp", config.poi_dim + c, c, c, rv, rng);
  gate_mlp_ = nn::make_mlp(params_, "revisit.gate_mlp", 3 * c, c, 1, rv, rng);
}

RevisitWeights RecapModel::revisit_weights() const {
  RevisitWeights w;
  w.lambda_prior = lambda_prior_.scalar();
  w.w_count = revisit_weights_.value()(0, 0);
  w.w_recency = revisit_weights_.value()(1, 0);
  w.w_window = revisit_weights_.value()(2, 0);
  w.tau = std::exp(log_tau_.scalar());
  w.b_max = config_.b_max;
  return w;
}

std::vector<std::uint8_t> RecapModel::key_mask(const Batch& batch) const {
  const auto len = static_cast<std::size_t>(sequence_length());
  std::vector<std::uint8_t> mask(batch.size() * len, 1);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& suffix = batch.instances[b]->suffix;
    for (std::size_t j = 0; j < suffix.size(); ++j)
      mask[b * len + 1 + j] = suffix[j] != num_pois_ ? 1 : 0;
  }
  return mask;
}

ag::Var RecapModel::tokenize(const Batch& batch, bool training, std::mt19937_64& rng) const {
  const auto k = static_cast<std::size_t>(config_.k);
  const std::size_t n = batch.size() * k;
  std::vector<ag::Index> poi_rows(n), cat_rows(n);
  ag::Matrix coords(static_cast<ag::Index>(n), 2);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& suffix = batch.instances[b]->suffix;
    if (suffix.size() != k) throw std::invalid_argument("tokenize: suffix length != k");
    for (std::size_t j = 0; j < k; ++j) {
      const PoiIndex p = suffix[j];
      if (p < 0 || p > num_pois_) throw std::out_of_range("tokenize: POI index out of vocabulary");
      const std::size_t i = b * k + j;
      poi_rows[i] = p;
      cat_rows[i] = poi_category_[static_cast<std::size_t>(p)];
      coords.row(static_cast<ag::Index>(i)) = poi_coords_.row(p);
    }
  }
  ag::Var e = ag::dropout(ag::gather_rows(poi_embedding_, poi_rows), config_.embedding_dropout, training, rng);
  ag::Var a = ag::dropout(ag::gather_rows(category_embedding_, cat_rows), config_.embedding_dropout,
                          training, rng);
  return token_mlp_(ag::concat_cols({e, a, ag::constant(std::move(coords))}));
}

ag::Var RecapModel::propagated() const {
  return propagate(ag::gather_rows(poi_embedding_, real_rows_), transitions_, config_.graph_hops);
}

ag::Var RecapModel::graph_tokens(const Batch& batch, bool training, std::mt19937_64& rng) const {
  std::vector<ag::Index> sources(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const PoiIndex s = batch.instances[b]->source;
    if (s < 0 || s >= num_pois_) throw std::out_of_range("graph_tokens: source out of vocabulary");
    sources[b] = s;
  }
  ag::Var g = graph_norm_(graph_mlp_(ag::gather_rows(propagated(), sources)));
  return ag::dropout(g, config_.graph_dropout, training, rng);
}

ag::Var RecapModel::encode(const Batch& batch, const ag::Var& tokens, const ag::Var& graph_tokens,
                           bool training, std::mt19937_64& rng) const {
  const auto b_count = static_cast<ag::Index>(batch.size());
  const ag::Index k = config_.k;
  const ag::Index len = sequence_length();
  if (tokens.rows() != b_count * k || graph_tokens.rows() != b_count)
    throw std::invalid_argument("encode: token count mismatch");

  std::vector<ag::Index> users(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const UserIndex u = batch.instances[b]->user;
    if (u < 0 || u >= num_users_) throw std::out_of_range("encode: user out of vocabulary");
    users[b] = u;
  }
  ag::Var stacked = ag::concat_rows({ag::gather_rows(user_embedding_, users), tokens, graph_tokens});
  std::vector<ag::Index> order;
  order.reserve(static_cast<std::size_t>(b_count * len));
  for (ag::Index b = 0; b < b_count; ++b) {
    order.push_back(b);
    for (ag::Index j = 0; j < k; ++j) order.push_back(b_count + b * k + j);
    order.push_back(b_count + b_count * k + b);
  }
  ag::Var z = ag::add_tiled(ag::gather_rows(stacked, order), positional_);
  const auto mask = key_mask(batch);
  ag::Var encoded = encoder_(z, len, mask, training, rng);
  std::vector<ag::Index> last(batch.size());
  for (ag::Index b = 0; b < b_count; ++b) last[static_cast<std::size_t>(b)] = b * len + len - 1;
  return ag::gather_rows(encoded, last);
}

ag::Var RecapModel::core_score(const ag::Var& hidden, bool training, std::mt19937_64& rng) const {
  ag::Var h = ag::dropout(hidden, config_.output_dropout, training, rng);
  return ag::add_row(ag::matmul_nt(h, output_weight_), output_bias_);
}

RevisitOutput RecapModel::revisit(const ag::Var& hidden, const Batch& batch,
                                  const CandidateTable& table, bool calibrate,
                                  bool detach_backbone) const {
  RevisitOutput out;
  const auto n = static_cast<ag::Index>(table.size());
  ag::Var alpha = ag::concat_cols({ag::constant(ag::Matrix(table.log_count)),
                                   ag::recency_decay(table.recency, log_tau_),
                                   ag::constant(ag::Matrix(table.in_window))});
  out.prior = ag::clip(ag::scale_by(ag::matmul(alpha, revisit_weights_), lambda_prior_), 0.0,
                       config_.b_max);
  if (!calibrate || n == 0) {
    out.adjustment = out.prior;
    return out;
  }
  ag::Var h = detach_backbone ? ag::detach(hidden) : hidden;
  std::vector<std::int64_t> times(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) times[b] = batch.instances[b]->query_time;
  ag::Var query = query_mlp_(ag::concat_cols({h, ag::constant(query_time_features(times))}));

  ag::Var phi = hist_mlp_(ag::concat_cols({alpha, ag::gather_rows(tod_embedding_, table.last_hour),
                                           ag::gather_rows(dow_embedding_, table.last_dow),
                                           ag::constant(table.pair)}));
  ag::Var e = ag::gather_rows(poi_embedding_, table.poi);
  if (detach_backbone) e = ag::detach(e);
  ag::Var v = cand_mlp_(ag::concat_cols({e, phi}));
  ag::Var qc = ag::gather_rows(query, table.row);
  out.gate = ag::tanh(gate_mlp_(ag::concat_cols({qc, v, ag::hadamard(qc, v)})));
  out.correction = ag::scale_by(ag::hadamard(out.gate, out.prior), lambda_corr_);
  out.adjustment = ag::add(out.prior, out.correction);
  return out;
}

ForwardOutput RecapModel::forward(const Batch& batch, const StageFlags& flags, bool training,
                                  std::mt19937_64& rng) const {
  ForwardOutput out;
  const auto b_count = static_cast<ag::Index>(batch.size());
  ag::Var tokens = tokenize(batch, training, rng);
  ag::Var graph;
  if (config_.use_graph && flags.graph_scale > 0.0) {
    graph = graph_tokens(batch, training, rng);
    if (flags.graph_scale != 1.0) graph = ag::scale(graph, flags.graph_scale);
  } else {
    graph = ag::constant(ag::Matrix::Zero(b_count, config_.hidden));
  }
  out.hidden = encode(batch, tokens, graph, training, rng);
  out.core_logits = core_score(out.hidden, training, rng);
  out.final_logits = out.core_logits;

  if (config_.use_history && flags.prior_active) {
    if (batch.stats.size() != batch.size())
      throw std::invalid_argument("forward: history branch needs revisit stats for every row");
    std::vector<std::size_t> rows(batch.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    out.candidates = build_candidate_table(batch, rows);
    out.history_applied = true;
    if (out.candidates.size() > 0) {
      out.revisit = revisit(out.hidden, batch, out.candidates, flags.corr_active, false);
      out.final_logits = ag::scatter_add(out.core_logits, out.revisit.adjustment,
                                         out.candidates.row, out.candidates.poi);
    }
  }
  return out;
}

ag::Var RecapModel::warm_logits(const ForwardOutput& out, const Batch& batch,
                                std::span<const std::size_t> rows, const StageFlags& flags) const {
  std::vector<ag::Index> idx(rows.begin(), rows.end());
  ag::Var core = ag::gather_rows(ag::detach(out.core_logits), idx);
  if (!out.history_applied) return core;
  Batch sub;
  for (std::size_t r : rows) {
    sub.instances.push_back(batch.instances.at(r));
    sub.stats.push_back(batch.stats.at(r));
  }
  std::vector<std::size_t> all(rows.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  CandidateTable table = build_candidate_table(sub, all);
  if (table.size() == 0) return core;
  ag::Var hidden = ag::gather_rows(ag::detach(out.hidden), idx);
  RevisitOutput r = revisit(hidden, sub, table, flags.corr_active, true);
  return ag::scatter_add(core, r.adjustment, table.row, table.poi);
}

}  // namespace recap
