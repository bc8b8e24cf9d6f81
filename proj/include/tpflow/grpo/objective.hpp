// SPDX-License-Identifier: Apache-2.0
//
// Clipped GRPO surrogate with a per-step Gaussian KL penalty, evaluated over a
// batch of recorded SDE transitions.

#pragma once

#include "tpflow/flow/sampler.hpp"
#include "tpflow/grpo/credit.hpp"
#include "tpflow/nn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace tpflow::grpo {

struct LossConfig {
  double clip_eps = 0.2;
  double kl_beta = 0.0004;
  Variant variant = Variant::TpUnconstrained;
  bool balance = true;
  bool first_step_rule = true;

  CreditConfig credit() const { return {variant, first_step_rule}; }

  void validate() const {
    if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw ConfigError("loss.clip_eps", "must lie in (0, 1)");
    if (!(kl_beta >= 0.0) || !std::isfinite(kl_beta)) {
      throw ConfigError("loss.kl_beta", "must be finite and non-negative");
    }
  }
};

/// One optimized transition x_t -> x_{t-1} of a stored rollout.
template <class Scalar>
struct OptimizedStep {
  const flow::Trajectory<Scalar>* trajectory = nullptr;
  std::size_t trajectory_index = 0;  // for diagnostics
  int t = 0;
  Scalar advantage = 0;
};

template <class Scalar>
struct ObjectiveValue {
  Scalar objective = 0;  // surrogate - beta * kl, to maximize
  Scalar surrogate = 0;
  Scalar kl = 0;
  Scalar mean_ratio = 0;
  std::size_t clipped = 0;  // steps whose clipped branch is active
  Vector<Scalar> gradient;  // d(-objective)/d(params), empty unless requested
};

/// Mean over `batch` of min(rho A, clip(rho, 1 - eps, 1 + eps) A) - beta KL,
/// with rho = p_params / p_rollout of the recorded transition and
/// KL = |mu_params - mu_ref|^2 / (2 std^2). `ref_params` may be null when
/// beta == 0. The gradient is that of the negated objective, ready for descent.
template <class Scalar>
ObjectiveValue<Scalar> grpo_objective(const nn::Mlp<Scalar>& mlp, const Vector<Scalar>& params,
                                      const Vector<Scalar>* ref_params,
                                      const std::vector<OptimizedStep<Scalar>>& batch,
                                      const flow::TimeGrid<Scalar>& grid, const LossConfig& config,
                                      bool with_gradient = true) {
  config.validate();
  ObjectiveValue<Scalar> out;
  if (batch.empty()) {
    if (with_gradient) out.gradient = Vector<Scalar>::Zero(mlp.param_count());
    return out;
  }
  const bool use_kl = config.kl_beta > 0.0;
  if (use_kl && ref_params == nullptr) throw ContractError("KL penalty needs reference parameters");

  const auto n = Eigen::Index(batch.size());
  const int num_conditions = mlp.spec().num_conditions();
  Matrix<Scalar> inputs(kStateDim + nn::kTimeEmbeddingDim + num_conditions, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& step = batch[std::size_t(j)];
    const auto& rec = step.trajectory->step(step.t);
    if (!rec.used_sde || !(rec.std > Scalar(0))) {
      throw ContractError("trajectory " + std::to_string(step.trajectory_index) + " step " +
                          std::to_string(step.t) + " is not a stochastic transition");
    }
    if (!std::isfinite(step.advantage)) {
      throw NumericError("non-finite advantage at trajectory " + std::to_string(step.trajectory_index) +
                         " step " + std::to_string(step.t));
    }
    inputs.col(j) = nn::velocity_input(step.trajectory->states[std::size_t(step.t)],
                                       grid.tau(step.t), step.trajectory->condition, num_conditions);
  }

  nn::Tape<Scalar> tape(mlp, params);
  const auto rec = tape.forward(inputs);
  Matrix<Scalar> ref_v;
  if (use_kl) ref_v = mlp.forward(*ref_params, inputs);

  const Scalar eps = Scalar(config.clip_eps);
  const Scalar beta = Scalar(config.kl_beta);
  const Scalar inv_n = Scalar(1) / Scalar(n);
  Matrix<Scalar> seed = Matrix<Scalar>::Zero(kStateDim, n);

  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& step = batch[std::size_t(j)];
    const auto& traj = *step.trajectory;
    const auto& sr = traj.step(step.t);
    const Point<Scalar>& x = traj.states[std::size_t(step.t)];
    const Point<Scalar>& next = traj.states[std::size_t(step.t - 1)];
    const Scalar tau = grid.tau(step.t);
    const Scalar h = grid.step_size(step.t);
    const Scalar var = sr.std * sr.std;

    const Point<Scalar> v = rec.output.col(j);
    const Point<Scalar> mean = flow::sde_mean(x, v, tau, h, sr.sigma);
    const Scalar log_prob = flow::gaussian_log_density(next, mean, sr.std);
    const Scalar ratio = std::exp(log_prob - sr.log_prob);
    if (!std::isfinite(ratio)) {
      throw NumericError("non-finite ratio at trajectory " + std::to_string(step.trajectory_index) +
                         " step " + std::to_string(step.t) + " (log-prob " + std::to_string(log_prob) +
                         ", rollout log-prob " + std::to_string(sr.log_prob) + ")");
    }
    const Scalar adv = step.advantage;
    const Scalar clipped_ratio = std::clamp(ratio, Scalar(1) - eps, Scalar(1) + eps);
    const Scalar unclipped_term = ratio * adv;
    const Scalar clipped_term = clipped_ratio * adv;
    const bool unclipped_active = unclipped_term <= clipped_term;
    const Scalar term = unclipped_active ? unclipped_term : clipped_term;
    if (!unclipped_active) ++out.clipped;

    // d(objective)/d(mean) of this column before averaging.
    Point<Scalar> d_mean = Point<Scalar>::Zero();
    if (unclipped_active) d_mean += adv * ratio * (next - mean) / var;

    Scalar kl = 0;
    if (use_kl) {
      const Point<Scalar> ref_mean = flow::sde_mean(x, Point<Scalar>(ref_v.col(j)), tau, h, sr.sigma);
      kl = (mean - ref_mean).squaredNorm() / (Scalar(2) * var);
      d_mean -= beta * (mean - ref_mean) / var;
    }

    out.surrogate += inv_n * term;
    out.kl += inv_n * kl;
    out.mean_ratio += inv_n * ratio;
    seed.col(j) = -inv_n * flow::sde_mean_velocity_gain(tau, h, sr.sigma) * d_mean;
  }
  out.objective = out.surrogate - beta * out.kl;
  if (!std::isfinite(out.objective)) throw NumericError("non-finite GRPO objective");
  if (with_gradient) {
    tape.seed(rec.id, seed);
    out.gradient = tape.gradient();
    nn::require_finite(out.gradient, "objective gradient");
  }
  return out;
}

}  // namespace tpflow::grpo
