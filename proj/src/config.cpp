// SPDX-License-Identifier: Apache-2.0
#include "recap/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <vector>

namespace recap {

namespace {

using nlohmann::json;

struct Field {
  std::string key;
  bool architecture = false;  // part of the checkpoint fingerprint
  std::function<json()> get;
  std::function<void(const json&)> set;
};

template <typename T>
Field field(std::string key, T& target, bool architecture = false) {
  Field f;
  f.key = std::move(key);
  f.architecture = architecture;
  f.get = [&target] { return json(target); };
  f.set = [&target, name = f.key](const json& v) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError("config key '" + name + "' expects a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError("config key '" + name + "' expects an integer");
      if (std::is_unsigned_v<T> && !v.is_number_unsigned())
        throw ConfigError("config key '" + name + "' expects a non-negative integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError("config key '" + name + "' expects a number");
    } else {
      if (!v.is_string()) throw ConfigError("config key '" + name + "' expects a string");
    }
    target = v.get<T>();
  };
  return f;
}

std::vector<Field> fields(RunConfig& c) {
  auto& m = c.model;
  auto& t = c.training;
  return {
      field("data.path", c.data_path),
      field("data.delimiter", c.delimiter),
      field("data.timestamp_format", c.timestamp_format),
      field("data.has_header", c.has_header),
      field("data.store", c.store_path),
      field("output_dir", c.output_dir),
      field("seed", t.seed),

      field("dataset.train_ratio", c.dataset.ratios.train),
      field("dataset.val_ratio", c.dataset.ratios.val),
      field("dataset.test_ratio", c.dataset.ratios.test),
      field("dataset.gap_seconds", c.dataset.gap_threshold_seconds),
      field("dataset.k", c.dataset.k, true),
      field("graph.cross_trajectory", c.cross_trajectory_counts, true),

      field("model.poi_dim", m.poi_dim, true),
      field("model.category_dim", m.category_dim, true),
      field("model.hidden", m.hidden, true),
      field("model.ffn", m.ffn, true),
      field("model.layers", m.layers, true),
      field("model.heads", m.heads, true),
      field("model.dropout", m.dropout),
      field("model.embedding_dropout", m.embedding_dropout),
      field("model.output_dropout", m.output_dropout),
      field("model.graph_hops", m.graph_hops, true),
      field("model.graph_hidden", m.graph_hidden, true),
      field("model.graph_dropout", m.graph_dropout),
      field("model.use_graph", m.use_graph, true),
      field("model.use_history", m.use_history, true),

      field("revisit.candidate_cap", m.candidate_cap, true),
      field("revisit.window", m.window, true),
      field("revisit.calibration_hidden", m.calibration_hidden, true),
      field("revisit.time_dim", m.time_dim, true),
      field("revisit.b_max", m.b_max, true),
      field("revisit.init", m.revisit_init),

      field("training.epochs", t.epochs),
      field("training.batch_size", t.batch_size),
      field("training.learning_rate", t.learning_rate),
      field("training.weight_decay", t.weight_decay),
      field("training.beta1", t.beta1),
      field("training.beta2", t.beta2),
      field("training.adam_eps", t.adam_eps),
      field("training.e_graph", t.e_graph),
      field("training.graph_ramp", t.graph_ramp),
      field("training.e_prior", t.e_prior),
      field("training.e_corr", t.e_corr),
      field("training.e_warm", t.e_warm),
      field("training.warm_max", t.warm_max),
      field("training.warm_ramp", t.warm_ramp),
      field("training.backbone_lr_scale", t.backbone_lr_scale),
      field("training.grad_clip", t.grad_clip),
      field("training.use_warm", t.use_warm),

      field("eval.eta", c.eta),
      field("eval.batch_size", c.eval_batch_size),
  };
}

json to_flat(RunConfig& c, bool architecture_only) {
  json j = json::object();
  for (const auto& f : fields(c))
    if (!architecture_only || f.architecture) j[f.key] = f.get();
  return j;
}

}  // namespace

LoadOptions RunConfig::load_options() const {
  LoadOptions o;
  if (delimiter.size() != 1) throw ConfigError("data.delimiter must be a single character");
  o.delimiter = delimiter[0];
  try {
    o.timestamp_format = parse_timestamp_format(timestamp_format);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  o.has_header = has_header;
  return o;
}

std::filesystem::path RunConfig::resolved_store_path() const {
  if (!store_path.empty()) return store_path;
  return std::filesystem::path(output_dir) / "store.json";
}

void RunConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("invalid config: " + msg); };
  (void)load_options();
  const auto& r = dataset.ratios;
  if (r.train <= 0 || r.val < 0 || r.test < 0 || std::abs(r.train + r.val + r.test - 1.0) > 1e-9)
    fail("dataset ratios must be non-negative and sum to 1");
  if (dataset.gap_threshold_seconds <= 0) fail("dataset.gap_seconds must be positive");
  if (dataset.k < 1) fail("dataset.k must be >= 1");
  if (model.poi_dim < 1 || model.category_dim < 1 || model.hidden < 1 || model.ffn < 1 ||
      model.graph_hidden < 1 || model.calibration_hidden < 1 || model.time_dim < 1)
    fail("model dimensions must be >= 1");
  if (model.layers < 1) fail("model.layers must be >= 1");
  if (model.heads < 1 || model.hidden % model.heads != 0) fail("model.hidden must be divisible by model.heads");
  for (double p : {model.dropout, model.embedding_dropout, model.output_dropout, model.graph_dropout})
    if (p < 0 || p >= 1) fail("dropout rates must lie in [0, 1)");
  if (model.graph_hops < 1) fail("model.graph_hops must be >= 1");
  if (model.candidate_cap < 1) fail("revisit.candidate_cap must be >= 1");
  if (model.window < 0) fail("revisit.window must be >= 0");
  if (!(model.b_max > 0)) fail("revisit.b_max must be positive");
  if (eta < 0) fail("eval.eta must be >= 0");
  if (eval_batch_size < 1) fail("eval.batch_size must be >= 1");
  try {
    training.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

json default_config_json() {
  RunConfig c;
  return to_flat(c, false);
}

json config_to_json(const RunConfig& config) {
  RunConfig copy = config;
  return to_flat(copy, false);
}

RunConfig config_from_json(const json& flat) {
  if (!flat.is_object()) throw ConfigError("config must be a JSON object of dotted keys");
  RunConfig c;
  auto table = fields(c);
  for (const auto& [key, value] : flat.items()) {
    auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return f.key == key; });
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    it->set(value);
  }
  c.model.k = c.dataset.k;
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

void save_config(const RunConfig& config, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << config_to_json(config).dump(2) << '\n';
}

void apply_override(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json current = config_to_json(config);
  if (!current.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  const json& proto = current[key];
  json value;
  if (proto.is_boolean()) {
    if (text == "true" || text == "1") value = true;
    else if (text == "false" || text == "0") value = false;
    else throw ConfigError("config key '" + key + "' expects true/false, got '" + text + "'");
  } else if (proto.is_number_unsigned()) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || p != text.data() + text.size())
      throw ConfigError("config key '" + key + "' expects an unsigned integer, got '" + text + "'");
    value = v;
  } else if (proto.is_number_integer()) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || p != text.data() + text.size())
      throw ConfigError("config key '" + key + "' expects an integer, got '" + text + "'");
    value = v;
  } else if (proto.is_number()) {
    try {
      std::size_t used = 0;
      value = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "' expects a number, got '" + text + "'");
    }
  } else {
    value = text == "\\t" ? std::string("\t") : text;
  }
  current[key] = value;
  config = config_from_json(current);
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_fingerprint(const RunConfig& config, const Vocabulary& vocab) {
  RunConfig copy = config;
  json j = to_flat(copy, true);
  j["vocab.users"] = vocab.num_users();
  j["vocab.pois"] = vocab.num_pois();
  j["vocab.categories"] = vocab.num_categories();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

}  // namespace recap
