// SPDX-License-Identifier: Apache-2.0
#include "recap/nn.hpp"

#include <cmath>

namespace recap::nn {

ag::Var ParameterStore::add(std::string name, ag::Matrix init, ParamGroup group) {
  ag::Var v = ag::parameter(std::move(init));
  params_.push_back({std::move(name), v, group});
  return v;
}

const NamedParameter* ParameterStore::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.var.zero_grad();
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.var.value().size());
  return n;
}

ag::Matrix uniform_init(ag::Index rows, ag::Index cols, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  ag::Matrix m(rows, cols);
  for (ag::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

ag::Matrix normal_init(ag::Index rows, ag::Index cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  ag::Matrix m(rows, cols);
  for (ag::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

ag::Var Linear::operator()(const ag::Var& x) const {
  return ag::add_row(ag::matmul(x, weight), bias);
}

Linear make_linear(ParameterStore& store, const std::string& name, ag::Index in, ag::Index out,
                   ParamGroup group, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Linear l;
  l.weight = store.add(name + ".weight", uniform_init(in, out, bound, rng), group);
  l.bias = store.add(name + ".bias", uniform_init(1, out, bound, rng), group);
  return l;
}

ag::Var Mlp::operator()(const ag::Var& x) const { return second(ag::gelu(first(x))); }

Mlp make_mlp(ParameterStore& store, const std::string& name, ag::Index in, ag::Index hidden,
             ag::Index out, ParamGroup group, std::mt19937_64& rng) {
  return {make_linear(store, name + ".0", in, hidden, group, rng),
          make_linear(store, name + ".1", hidden, out, group, rng)};
}

ag::Var LayerNorm::operator()(const ag::Var& x) const { return ag::layer_norm(x, gamma, beta); }

LayerNorm make_layer_norm(ParameterStore& store, const std::string& name, ag::Index width,
                          ParamGroup group) {
  return {store.add(name + ".gamma", ag::Matrix::Ones(1, width), group),
          store.add(name + ".beta", ag::Matrix::Zero(1, width), group)};
}

TransformerEncoder::TransformerEncoder(ParameterStore& store, const std::string& name,
                                       const EncoderConfig& cfg, std::mt19937_64& rng)
    : cfg_(cfg) {
  const auto group = ParamGroup::kBackbone;
  for (int i = 0; i < cfg.layers; ++i) {
    const std::string p = name + ".layer" + std::to_string(i);
    EncoderLayer layer;
    layer.attn_norm = make_layer_norm(store, p + ".attn_norm", cfg.hidden, group);
    layer.query = make_linear(store, p + ".query", cfg.hidden, cfg.hidden, group, rng);
    layer.key = make_linear(store, p + ".key", cfg.hidden, cfg.hidden, group, rng);
    layer.value = make_linear(store, p + ".value", cfg.hidden, cfg.hidden, group, rng);
    layer.attn_out = make_linear(store, p + ".attn_out", cfg.hidden, cfg.hidden, group, rng);
    layer.ffn_norm = make_layer_norm(store, p + ".ffn_norm", cfg.hidden, group);
    layer.ffn_in = make_linear(store, p + ".ffn_in", cfg.hidden, cfg.ffn, group, rng);
    layer.ffn_out = make_linear(store, p + ".ffn_out", cfg.ffn, cfg.hidden, group, rng);
    layers_.push_back(std::move(layer));
  }
  final_norm_ = make_layer_norm(store, name + ".final_norm", cfg.hidden, group);
}

ag::Var TransformerEncoder::operator()(const ag::Var& x, ag::Index seq_len,
                                       std::span<const std::uint8_t> key_mask, bool training,
                                       std::mt19937_64& rng) const {
  ag::Var h = x;
  for (const auto& layer : layers_) {
    ag::Var n = layer.attn_norm(h);
    ag::Var attn = ag::masked_attention(layer.query(n), layer.key(n), layer.value(n), seq_len,
                                        cfg_.heads, key_mask);
    h = ag::add(h, ag::dropout(layer.attn_out(attn), cfg_.dropout, training, rng));
    ag::Var f = layer.ffn_out(ag::gelu(layer.ffn_in(layer.ffn_norm(h))));
    h = ag::add(h, ag::dropout(f, cfg_.dropout, training, rng));
  }
  return final_norm_(h);
}

}  // namespace recap::nn
