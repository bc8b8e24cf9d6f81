// SPDX-License-Identifier: Apache-2.0
#include "tpflow/flow/pretrain.hpp"

#include "tpflow/flow/sampler.hpp"
#include "tpflow/nn/adam.hpp"
#include "tpflow/nn/tape.hpp"

#include <random>
#include <string>

namespace tpflow::flow {
namespace {

using MatrixXd = Matrix<double>;

struct Batch {
  MatrixXd inputs;
  MatrixXd targets;
};

template <class Rng>
Batch draw_batch(const Dataset& data, const std::vector<std::size_t>& indices, int num_conditions,
                 Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Batch batch{MatrixXd(kStateDim + nn::kTimeEmbeddingDim + num_conditions, Eigen::Index(indices.size())),
              MatrixXd(kStateDim, Eigen::Index(indices.size()))};
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const LabeledPoint& sample = data[indices[i]];
    const double tau = unit(rng);
    const Point2 noise = standard_normal_point<double>(rng);
    const Point2 x_tau = (1.0 - tau) * sample.x + tau * noise;
    batch.inputs.col(Eigen::Index(i)) = nn::velocity_input(x_tau, tau, sample.condition, num_conditions);
    batch.targets.col(Eigen::Index(i)) = noise - sample.x;
  }
  return batch;
}

double batch_loss(const nn::Mlp<double>& mlp, const VectorXd& params, const Batch& batch) {
  const MatrixXd residual = mlp.forward(params, batch.inputs) - batch.targets;
  return residual.colwise().squaredNorm().mean();
}

}  // namespace

Dataset make_gaussian_modes_dataset(const std::vector<Point2>& centers, double spread,
                                    int per_condition, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Dataset data;
  data.reserve(centers.size() * std::size_t(per_condition));
  for (int c = 0; c < int(centers.size()); ++c) {
    for (int i = 0; i < per_condition; ++i) {
      data.push_back({centers[std::size_t(c)] + spread * standard_normal_point<double>(rng), c});
    }
  }
  return data;
}

double flow_matching_loss(const nn::Mlp<double>& mlp, const VectorXd& params, const Dataset& data,
                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> all(data.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return batch_loss(mlp, params, draw_batch(data, all, mlp.spec().num_conditions(), rng));
}

PretrainResult pretrain_flow(const nn::Mlp<double>& mlp, const VectorXd& init, const Dataset& data,
                             const PretrainConfig& config) {
  const int num_conditions = mlp.spec().num_conditions();
  std::vector<int> per_condition(std::size_t(num_conditions), 0);
  for (const auto& sample : data) {
    if (sample.condition < 0 || sample.condition >= num_conditions) {
      throw ConfigError("dataset has condition " + std::to_string(sample.condition) +
                        " outside the model's " + std::to_string(num_conditions));
    }
    ++per_condition[std::size_t(sample.condition)];
  }
  for (int c = 0; c < num_conditions; ++c) {
    if (per_condition[std::size_t(c)] == 0) {
      throw ConfigError("dataset has no samples for condition " + std::to_string(c));
    }
  }
  if (config.batch_size < 1) throw ConfigError("pretrain.batch_size", "must be positive");

  std::mt19937_64 rng(config.seed);

  // Held-out batch with its own fixed (tau, noise) draws.
  std::vector<std::size_t> holdout_idx;
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  for (int i = 0; i < config.holdout_size; ++i) holdout_idx.push_back(pick(rng));
  const Batch holdout = draw_batch(data, holdout_idx, num_conditions, rng);

  PretrainResult result;
  result.params = init;
  result.initial_holdout_loss = batch_loss(mlp, init, holdout);

  auto adam = nn::AdamState<double>::zeros(mlp.param_count());
  const nn::AdamConfig adam_config{config.lr};
  std::vector<std::size_t> idx(std::size_t(config.batch_size));
  for (int it = 0; it < config.iterations; ++it) {
    for (auto& i : idx) i = pick(rng);
    const Batch batch = draw_batch(data, idx, num_conditions, rng);
    const double scale = 2.0 / double(config.batch_size);
    try {
      auto [loss, grad] = nn::value_and_gradient(mlp, result.params, [&](nn::Tape<double>& tape) {
        auto rec = tape.forward(batch.inputs);
        const MatrixXd residual = rec.output - batch.targets;
        tape.seed(rec.id, scale * residual);
        return residual.colwise().squaredNorm().mean();
      });
      result.loss_curve.push_back(loss);
      nn::adam_step(adam, result.params, grad, adam_config);
    } catch (const NumericError& e) {
      throw NumericError("pretraining diverged at iteration " + std::to_string(it) + ": " + e.what());
    }
  }
  result.final_holdout_loss = batch_loss(mlp, result.params, holdout);
  return result;
}

}  // namespace tpflow::flow
