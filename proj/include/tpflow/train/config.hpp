// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tpflow/flow/pretrain.hpp"
#include "tpflow/flow/sampler.hpp"
#include "tpflow/grpo/objective.hpp"
#include "tpflow/nn/mlp.hpp"
#include "tpflow/reward/reward.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace tpflow::train {

struct ModelConfig {
  std::vector<int> hidden{64, 64, 64};
  nn::Activation activation = nn::Activation::Tanh;
};

/// Pretraining data: Gaussian blobs around the reward centers.
struct DataConfig {
  double spread = 1.0;
  int samples_per_condition = 2048;
  std::uint64_t seed = 0;
};

struct SamplerSettings {
  int steps = 10;
  double alpha = 0.7;
  int window = 10;
  bool final_step_sde = false;
  double tau_max = flow::TimeGrid<double>::kDefaultTauMax;
};

enum class BalanceScope {
  GradientBatch,  // all trajectories at one optimized step
  Iteration,      // every optimized step of the iteration at once
};

struct TrainSettings {
  int iterations = 300;
  int samples_per_iteration = 96;
  int group_size = 24;
  int inner_epochs = 1;
  double lr = 3e-4;
  int checkpoint_every = 25;
  BalanceScope balance_scope = BalanceScope::GradientBatch;
};

struct EvalSettings {
  int steps = 40;
  int samples_per_condition = 256;
  int every = 10;  // evaluate after every `every` iterations and after the last
  std::uint64_t seed = 1234;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;  // fine-tuning root seed
  ModelConfig model;
  reward::RewardSpec reward;
  DataConfig data;
  flow::PretrainConfig pretrain;
  SamplerSettings sampler;
  grpo::LossConfig loss;
  TrainSettings train;
  EvalSettings eval;

  nn::MlpSpec mlp_spec() const;
  flow::SamplerConfig<double> sampler_config() const;
  flow::TimeGrid<double> eval_grid() const;
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& config);

/// Strict conversion: every key must name a known field.
ExperimentConfig config_from_json(const nlohmann::json& j);

/// Applies "dotted.key=value" to a config document. The value is parsed as
/// JSON when possible, otherwise taken as a string. Unknown keys are rejected.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Defaults, then the file at `path` (if non-empty), then each override.
ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides = {});

}  // namespace tpflow::train
