// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "recap/autograd.hpp"
#include "recap/nn.hpp"

namespace recap {

/// Binary layout: "RECAPCKP", u32 version, u64 header length, JSON header,
/// then every tensor as row-major little-endian doubles in header order.
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  std::string fingerprint;
  nlohmann::json metadata;  // resolved config, best epoch, ...
  std::vector<std::string> names;
  std::vector<ag::Matrix> tensors;
};

Checkpoint make_checkpoint(const nn::ParameterStore& params, std::string fingerprint,
                           nlohmann::json metadata);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// Copies tensors into `params`; names and shapes must match exactly.
void restore_parameters(nn::ParameterStore& params, const Checkpoint& ckpt);

}  // namespace recap
