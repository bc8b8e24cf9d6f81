// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tpflow/nn/mlp.hpp"
#include "tpflow/types.hpp"

#include <cstdint>
#include <vector>

namespace tpflow::flow {

struct LabeledPoint {
  Point2 x;
  int condition = 0;
};

using Dataset = std::vector<LabeledPoint>;

/// `per_condition` draws from N(centers[c], spread^2 I) for every condition c.
Dataset make_gaussian_modes_dataset(const std::vector<Point2>& centers, double spread,
                                    int per_condition, std::uint64_t seed);

struct PretrainConfig {
  int iterations = 3000;
  int batch_size = 256;
  double lr = 2e-3;
  int holdout_size = 1024;
  std::uint64_t seed = 0;
};

struct PretrainResult {
  VectorXd params;
  std::vector<double> loss_curve;  // training minibatch loss per iteration
  double initial_holdout_loss = 0;
  double final_holdout_loss = 0;
};

/// Rectified-flow regression: minimizes E || v(x_tau, tau, c) - (noise - x) ||^2
/// with x_tau = (1 - tau) x + tau * noise and tau ~ U(0, 1).
/// Starts from `init`; zero iterations return it unchanged.
PretrainResult pretrain_flow(const nn::Mlp<double>& mlp, const VectorXd& init, const Dataset& data,
                             const PretrainConfig& config);

/// Mean flow-matching loss on a fixed draw of (tau, noise) pairs.
double flow_matching_loss(const nn::Mlp<double>& mlp, const VectorXd& params, const Dataset& data,
                          std::uint64_t seed);

}  // namespace tpflow::flow
