// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tpflow/nn/mlp.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace tpflow::nn {

/// On-disk layout:
///   u64 little-endian  header length in bytes
///   header             UTF-8 JSON {"format", "version", "spec", "seed", "param_count", ...}
///   f64 little-endian  param_count parameter values
struct Checkpoint {
  static constexpr int kVersion = 1;

  MlpSpec spec;
  VectorXd params;
  std::uint64_t seed = 0;
  std::string label;  // free-form, e.g. "base", "iteration-25"
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tpflow::nn
