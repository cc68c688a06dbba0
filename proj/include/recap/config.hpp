// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "recap/dataset.hpp"
#include "recap/model.hpp"
#include "recap/training.hpp"

namespace recap {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything a run needs. Serialized as a flat object of dotted keys,
/// e.g. {"model.hidden": 256, "training.epochs": 130}.
struct RunConfig {
  std::string data_path;
  std::string delimiter = "\t";
  std::string timestamp_format = "epoch";
  bool has_header = false;
  std::string store_path;  // empty: <output_dir>/store.json
  std::string output_dir = "runs/default";

  DatasetOptions dataset;
  ModelConfig model;
  TrainingConfig training;
  bool cross_trajectory_counts = false;  // count pairs across time gaps too
  int eta = 1;
  int eval_batch_size = 512;

  LoadOptions load_options() const;
  std::filesystem::path resolved_store_path() const;
  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

/// Defaults, as flat JSON.
nlohmann::json default_config_json();
nlohmann::json config_to_json(const RunConfig& config);
/// Missing keys take defaults; unknown keys or mistyped values throw ConfigError.
RunConfig config_from_json(const nlohmann::json& flat);
RunConfig load_config(const std::filesystem::path& path);
void save_config(const RunConfig& config, const std::filesystem::path& path);
/// Applies one `key=value` override, parsing `value` by the key's type.
void apply_override(RunConfig& config, const std::string& assignment);

/// 16 hex digits identifying the model architecture and vocabulary sizes.
std::string config_fingerprint(const RunConfig& config, const Vocabulary& vocab);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace recap
