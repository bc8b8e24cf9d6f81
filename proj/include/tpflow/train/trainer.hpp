// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tpflow/grpo/credit.hpp"
#include "tpflow/nn/adam.hpp"
#include "tpflow/train/config.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

namespace tpflow::train {

struct EvalResult {
  double mean = 0;
  double std = 0;
  std::vector<double> per_condition_mean;
};

struct IterationMetrics {
  int iteration = 0;  // 1-based
  double mean_reward = 0;  // rollout terminal reward
  double reward_std = 0;
  double objective = 0;    // mean over updates
  double kl = 0;
  double mean_ratio = 0;
  std::size_t clipped = 0;
  std::size_t updates = 0;
  std::size_t turning_points = 0;  // before balancing
  std::size_t first_steps = 0;     // before balancing
  std::size_t replacements_kept = 0;
  std::optional<double> eval_mean;
  std::optional<double> eval_std;
};

nlohmann::json to_json(const IterationMetrics& m);

struct TrainerState {
  VectorXd params;      // policy being optimized
  VectorXd old_params;  // rollout snapshot of the current iteration
  VectorXd ref_params;  // KL reference, fixed at fine-tuning start
  nn::AdamState<double> adam;
  int iteration = 0;
  std::uint64_t root_seed = 0;
  std::vector<IterationMetrics> history;
};

/// Optional artifacts and test hooks for run_training.
struct TrainingOptions {
  /// When set: metrics.jsonl, checkpoint-*.bin and summary.json go here.
  std::filesystem::path out_dir;
  /// Called with each group's advantages (G x T) before optimization.
  std::function<void(int iteration, Matrix<double>& advantages)> on_advantages;
};

struct TrainingResult {
  VectorXd params;
  std::vector<IterationMetrics> history;
  EvalResult initial_eval;
};

/// Mean and std of the terminal reward over eval.samples_per_condition
/// full-ODE samples per condition at eval.steps steps.
EvalResult evaluate(const nn::Mlp<double>& mlp, const VectorXd& params, const ExperimentConfig& config);

/// Pretrains the base velocity field described by `config`.
flow::PretrainResult pretrain_base(const ExperimentConfig& config);

/// GRPO fine-tuning from `base_params`. Each iteration samples
/// train.samples_per_iteration SDE rollouts in groups sharing a condition,
/// scores their ODE completions, assigns effective step rewards per
/// loss.variant, normalizes them per step within each group and takes one
/// Adam step per optimized step t = T..1 and inner epoch.
TrainingResult run_training(const ExperimentConfig& config, const VectorXd& base_params,
                            const TrainingOptions& options = {});

struct TracedTrajectory {
  flow::Trajectory<double> trajectory;
  grpo::StepRewardTable<double> table;
};

/// n rollouts at the training sampler with full step reward tables
/// (no balancing). Conditions cycle through 0..K-1.
std::vector<TracedTrajectory> trace_trajectories(const nn::Mlp<double>& mlp, const VectorXd& params,
                                                 const ExperimentConfig& config, int n,
                                                 std::uint64_t seed);

}  // namespace tpflow::train
