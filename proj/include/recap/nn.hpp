// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <random>
#include <string>
#include <vector>

#include "recap/autograd.hpp"

namespace recap::nn {

/// Optimizer group. Backbone parameters get the scaled learning rate once
/// contextual calibration starts; revisit parameters keep the base rate.
enum class ParamGroup { kBackbone, kRevisit };

struct NamedParameter {
  std::string name;
  ag::Var var;
  ParamGroup group;
};

class ParameterStore {
 public:
  ag::Var add(std::string name, ag::Matrix init, ParamGroup group);

  const std::vector<NamedParameter>& all() const { return params_; }
  std::vector<NamedParameter>& all() { return params_; }
  const NamedParameter* find(const std::string& name) const;
  void zero_grad();
  std::size_t scalar_count() const;

 private:
  std::vector<NamedParameter> params_;
};

ag::Matrix uniform_init(ag::Index rows, ag::Index cols, double bound, std::mt19937_64& rng);
ag::Matrix normal_init(ag::Index rows, ag::Index cols, double stddev, std::mt19937_64& rng);

struct Linear {
  ag::Var weight;  // in x out
  ag::Var bias;    // 1 x out

  ag::Var operator()(const ag::Var& x) const;
};
Linear make_linear(ParameterStore& store, const std::string& name, ag::Index in, ag::Index out,
                   ParamGroup group, std::mt19937_64& rng);

/// Two-layer perceptron with GELU between the layers.
struct Mlp {
  Linear first;
  Linear second;

  ag::Var operator()(const ag::Var& x) const;
};
Mlp make_mlp(ParameterStore& store, const std::string& name, ag::Index in, ag::Index hidden,
             ag::Index out, ParamGroup group, std::mt19937_64& rng);

struct LayerNorm {
  ag::Var gamma;
  ag::Var beta;

  ag::Var operator()(const ag::Var& x) const;
};
LayerNorm make_layer_norm(ParameterStore& store, const std::string& name, ag::Index width,
                          ParamGroup group);

struct EncoderLayer {
  LayerNorm attn_norm;
  Linear query, key, value, attn_out;
  LayerNorm ffn_norm;
  Linear ffn_in, ffn_out;
};

struct EncoderConfig {
  ag::Index hidden = 256;
  ag::Index ffn = 512;
  int layers = 2;
  int heads = 4;
  double dropout = 0.1;
};

/// Pre-norm transformer encoder over fixed-length packed sequences.
class TransformerEncoder {
 public:
  TransformerEncoder() = default;
  TransformerEncoder(ParameterStore& store, const std::string& name, const EncoderConfig& cfg,
                     std::mt19937_64& rng);

  /// x: (batch * seq_len) x hidden. key_mask: one flag per row.
  ag::Var operator()(const ag::Var& x, ag::Index seq_len, std::span<const std::uint8_t> key_mask,
                     bool training, std::mt19937_64& rng) const;

  const EncoderConfig& config() const { return cfg_; }

 private:
  EncoderConfig cfg_;
  std::vector<EncoderLayer> layers_;
  LayerNorm final_norm_;
};

}  // namespace recap::nn
