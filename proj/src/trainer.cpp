// SPDX-License-Identifier: Apache-2.0
#include "tpflow/train/trainer.hpp"

#include "tpflow/grpo/advantage.hpp"
#include "tpflow/grpo/objective.hpp"
#include "tpflow/nn/checkpoint.hpp"
#include "tpflow/parallel.hpp"
#include "tpflow/reward/reward.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <span>

namespace tpflow::train {
namespace {

using MatrixXd = Matrix<double>;

std::string checkpoint_name(int iteration) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "checkpoint-%06d.bin", iteration);
  return buf;
}

void write_checkpoint(const std::filesystem::path& dir, const std::string& name, const nn::MlpSpec& spec,
                      const VectorXd& params, std::uint64_t seed, const std::string& label) {
  nn::save_checkpoint(dir / name, nn::Checkpoint{spec, params, seed, label});
}

std::vector<bool> optimized_mask(const flow::SamplerConfig<double>& sampler) {
  const int steps = sampler.grid.steps();
  std::vector<bool> mask(std::size_t(steps + 1), false);
  for (int t = 1; t <= steps; ++t) mask[std::size_t(t)] = sampler.uses_sde(t);
  return mask;
}

}  // namespace

nlohmann::json to_json(const IterationMetrics& m) {
  nlohmann::json j = {
      {"iteration", m.iteration},
      {"mean_reward", m.mean_reward},
      {"reward_std", m.reward_std},
      {"objective", m.objective},
      {"kl", m.kl},
      {"mean_ratio", m.mean_ratio},
      {"clipped", m.clipped},
      {"updates", m.updates},
      {"turning_points", m.turning_points},
      {"first_steps", m.first_steps},
      {"replacements_kept", m.replacements_kept},
  };
  if (m.eval_mean) j["eval_mean"] = *m.eval_mean;
  if (m.eval_std) j["eval_std"] = *m.eval_std;
  return j;
}

EvalResult evaluate(const nn::Mlp<double>& mlp, const VectorXd& params, const ExperimentConfig& config) {
  const auto grid = config.eval_grid();
  const int num_conditions = config.reward.num_conditions();
  const int m = config.eval.samples_per_condition;
  const int input_dim = mlp.spec().input_dim;

  EvalResult result;
  std::vector<double> rewards;
  rewards.reserve(std::size_t(num_conditions * m));
  for (int c = 0; c < num_conditions; ++c) {
    std::mt19937_64 rng(derive_seed(config.eval.seed, std::uint64_t(c)));
    MatrixXd x(kStateDim, m);
    for (int j = 0; j < m; ++j) x.col(j) = flow::standard_normal_point<double>(rng);

    MatrixXd inputs = MatrixXd::Zero(input_dim, m);
    inputs.row(kStateDim + nn::kTimeEmbeddingDim + c).setOnes();
    for (int t = grid.steps(); t >= 1; --t) {
      const double tau = grid.tau(t);
      inputs.topRows(kStateDim) = x;
      inputs.row(kStateDim).setConstant(tau);
      inputs.row(kStateDim + 1).setConstant(std::sin(2.0 * std::numbers::pi * tau));
      inputs.row(kStateDim + 2).setConstant(std::cos(2.0 * std::numbers::pi * tau));
      x -= grid.step_size(t) * mlp.forward(params, inputs);
    }
    double sum = 0;
    for (int j = 0; j < m; ++j) {
      const double r = reward::reward<double>(x.col(j), c, config.reward);
      rewards.push_back(r);
      sum += r;
    }
    result.per_condition_mean.push_back(sum / m);
  }
  double mean = 0;
  for (double r : rewards) mean += r;
  mean /= double(rewards.size());
  double var = 0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  result.mean = mean;
  result.std = std::sqrt(var / double(rewards.size()));
  return result;
}

flow::PretrainResult pretrain_base(const ExperimentConfig& config) {
  config.validate();
  const nn::Mlp<double> mlp(config.mlp_spec());
  const auto data = flow::make_gaussian_modes_dataset(config.reward.centers, config.data.spread,
                                                      config.data.samples_per_condition, config.data.seed);
  std::mt19937_64 init_rng(derive_seed(config.pretrain.seed, 0x1417));
  const VectorXd init = mlp.init_params(init_rng);
  return flow::pretrain_flow(mlp, init, data, config.pretrain);
}

TrainingResult run_training(const ExperimentConfig& config, const VectorXd& base_params,
                            const TrainingOptions& options) {
  config.validate();
  const nn::MlpSpec spec = config.mlp_spec();
  const nn::Mlp<double> mlp(spec);
  if (base_params.size() != mlp.param_count()) {
    throw ConfigError("base parameters do not match the configured model");
  }
  const auto sampler = config.sampler_config();
  const auto& grid = sampler.grid;
  const int steps = grid.steps();
  const auto mask = optimized_mask(sampler);
  const grpo::CreditConfig credit = config.loss.credit();
  const bool tp_variant = config.loss.variant != grpo::Variant::BaselineTerminal;
  const int n = config.train.samples_per_iteration;
  const int g = config.train.group_size;
  const int num_groups = n / g;
  const nn::AdamConfig adam_config{config.train.lr};

  TrainerState state;
  state.params = base_params;
  state.ref_params = base_params;
  state.adam = nn::AdamState<double>::zeros(mlp.param_count());
  state.root_seed = config.seed;

  const bool write = !options.out_dir.empty();
  std::ofstream metrics_out;
  if (write) {
    std::filesystem::create_directories(options.out_dir);
    metrics_out.open(options.out_dir / "metrics.jsonl", std::ios::trunc);
    if (!metrics_out) throw std::runtime_error("cannot write metrics.jsonl in " + options.out_dir.string());
  }

  TrainingResult result;
  result.initial_eval = evaluate(mlp, state.params, config);
  double best_eval = result.initial_eval.mean;

  std::vector<int> optimized_steps;
  for (int t = steps; t >= 1; --t) {
    if (mask[std::size_t(t)]) optimized_steps.push_back(t);
  }

  for (int k = 1; k <= config.train.iterations; ++k) {
    state.iteration = k;
    IterationMetrics metrics;
    metrics.iteration = k;

    // Stage 1: rollouts and intermediate rewards from a frozen snapshot.
    state.old_params = state.params;
    const flow::VelocityModel<double> rollout(mlp, state.old_params);
    std::vector<int> conditions(static_cast<std::size_t>(num_groups));
    {
      std::mt19937_64 rng(derive_seed(state.root_seed, std::uint64_t(k), 0));
      std::uniform_int_distribution<int> pick(0, config.reward.num_conditions() - 1);
      for (int& c : conditions) c = pick(rng);
    }
    std::vector<flow::Trajectory<double>> trajectories(static_cast<std::size_t>(n));
    std::vector<grpo::StepRewardTable<double>> tables(static_cast<std::size_t>(n));
    parallel_for(std::size_t(n), [&](std::size_t i) {
      const int condition = conditions[i / std::size_t(g)];
      trajectories[i] = flow::sample_trajectory(rollout, condition, sampler,
                                                derive_seed(state.root_seed, std::uint64_t(k), i + 1));
      const auto values = reward::evaluate_intermediate_rewards(rollout, trajectories[i], config.reward, grid);
      tables[i] = grpo::build_step_table<double>(values, credit, mask);
    });

    double reward_sum = 0;
    for (const auto& table : tables) {
      reward_sum += table.values[0];
      for (int t = 1; t <= steps; ++t) {
        const auto flag = table.flags[std::size_t(t)];
        if (flag == grpo::StepFlag::TurningPoint) ++metrics.turning_points;
        if (flag == grpo::StepFlag::FirstStepSelected) ++metrics.first_steps;
      }
    }
    metrics.mean_reward = reward_sum / n;
    double reward_var = 0;
    for (const auto& table : tables) reward_var += std::pow(table.values[0] - metrics.mean_reward, 2);
    metrics.reward_std = std::sqrt(reward_var / n);

    metrics.replacements_kept = metrics.turning_points + metrics.first_steps;
    if (tp_variant && config.loss.balance) {
      const std::span<grpo::StepRewardTable<double>> all(tables);
      metrics.replacements_kept = 0;
      if (config.train.balance_scope == BalanceScope::GradientBatch) {
        for (int t : optimized_steps) metrics.replacements_kept += grpo::balance_tables(all, t);
      } else {
        metrics.replacements_kept = grpo::balance_tables(all, 0);
      }
    }

    MatrixXd advantages(n, steps);
    for (int gi = 0; gi < num_groups; ++gi) {
      const std::span<const grpo::StepRewardTable<double>> group(tables.data() + gi * g, std::size_t(g));
      MatrixXd adv = grpo::compute_advantages(group);
      if (options.on_advantages) options.on_advantages(k, adv);
      advantages.middleRows(gi * g, g) = adv;
    }

    // Stage 2: one Adam step per optimized timestep.
    try {
      for (int epoch = 0; epoch < config.train.inner_epochs; ++epoch) {
        for (int t : optimized_steps) {
          std::vector<grpo::OptimizedStep<double>> batch;
          batch.reserve(std::size_t(n));
          for (int i = 0; i < n; ++i) {
            batch.push_back({&trajectories[std::size_t(i)], std::size_t(i), t, advantages(i, t - 1)});
          }
          const auto value = grpo::grpo_objective(mlp, state.params, &state.ref_params, batch, grid, config.loss);
          nn::adam_step(state.adam, state.params, value.gradient, adam_config);
          metrics.objective += value.objective;
          metrics.kl += value.kl;
          metrics.mean_ratio += value.mean_ratio;
          metrics.clipped += value.clipped;
          ++metrics.updates;
        }
      }
    } catch (const NumericError& e) {
      if (write) {
        write_checkpoint(options.out_dir, "checkpoint-failed.bin", spec, state.params, state.root_seed,
                         "failed-iteration-" + std::to_string(k));
      }
      throw NumericError("iteration " + std::to_string(k) + ": " + e.what());
    }
    if (metrics.updates > 0) {
      metrics.objective /= double(metrics.updates);
      metrics.kl /= double(metrics.updates);
      metrics.mean_ratio /= double(metrics.updates);
    }

    const bool eval_now =
        config.eval.every > 0 && (k % config.eval.every == 0 || k == config.train.iterations);
    if (eval_now) {
      const auto eval = evaluate(mlp, state.params, config);
      metrics.eval_mean = eval.mean;
      metrics.eval_std = eval.std;
      if (write && eval.mean > best_eval) {
        write_checkpoint(options.out_dir, "checkpoint-best.bin", spec, state.params, state.root_seed,
                         "best-iteration-" + std::to_string(k));
      }
      best_eval = std::max(best_eval, eval.mean);
    }
    if (write) {
      metrics_out << to_json(metrics).dump() << '\n';
      metrics_out.flush();
      if (config.train.checkpoint_every > 0 && k % config.train.checkpoint_every == 0) {
        write_checkpoint(options.out_dir, checkpoint_name(k), spec, state.params, state.root_seed,
                         "iteration-" + std::to_string(k));
      }
    }
    state.history.push_back(metrics);
  }

  if (write) {
    write_checkpoint(options.out_dir, "checkpoint-final.bin", spec, state.params, state.root_seed, "final");
    const nlohmann::json summary = {
        {"iterations", config.train.iterations},
        {"variant", grpo::to_string(config.loss.variant)},
        {"initial_eval_mean", result.initial_eval.mean},
        {"initial_eval_std", result.initial_eval.std},
        {"best_eval_mean", best_eval},
        {"config", to_json(config)},
    };
    std::ofstream(options.out_dir / "summary.json") << summary.dump(2) << '\n';
  }

  result.params = std::move(state.params);
  result.history = std::move(state.history);
  return result;
}

std::vector<TracedTrajectory> trace_trajectories(const nn::Mlp<double>& mlp, const VectorXd& params,
                                                 const ExperimentConfig& config, int n, std::uint64_t seed) {
  config.validate();
  const auto sampler = config.sampler_config();
  const auto mask = optimized_mask(sampler);
  const flow::VelocityModel<double> model(mlp, params);
  std::vector<TracedTrajectory> out(std::size_t(std::max(n, 0)));
  parallel_for(out.size(), [&](std::size_t i) {
    const int condition = int(i % std::size_t(config.reward.num_conditions()));
    auto traj = flow::sample_trajectory(model, condition, sampler, derive_seed(seed, i));
    const auto values = reward::evaluate_intermediate_rewards(model, traj, config.reward, sampler.grid);
    out[i] = {std::move(traj), grpo::build_step_table<double>(values, config.loss.credit(), mask)};
  });
  return out;
}

}  // namespace tpflow::train
