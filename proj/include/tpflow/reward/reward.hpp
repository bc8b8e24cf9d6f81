// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tpflow/flow/sampler.hpp"
#include "tpflow/types.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace tpflow::reward {

enum class RewardKind { GaussianBump, NegSqDistance };

std::string to_string(RewardKind kind);
RewardKind reward_kind_from_string(const std::string& name);

/// One reward mode per condition id.
struct RewardSpec {
  std::vector<Point2> centers{{2.0, 2.0}, {-2.0, 2.0}, {-2.0, -2.0}, {2.0, -2.0}};
  double bandwidth = 1.0;
  RewardKind kind = RewardKind::GaussianBump;

  int num_conditions() const { return int(centers.size()); }

  void validate() const {
    if (centers.empty()) throw ConfigError("reward.centers", "need at least one center");
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
      throw ConfigError("reward.bandwidth", "must be positive and finite");
    }
    for (std::size_t i = 0; i < centers.size(); ++i) {
      if (!centers[i].allFinite()) throw ConfigError("reward.centers", "entries must be finite");
      for (std::size_t j = 0; j < i; ++j) {
        if (centers[i] == centers[j]) throw ConfigError("reward.centers", "centers must be distinct");
      }
    }
  }
};

/// gaussian-bump: exp(-|x - mu_c|^2 / (2 s^2)); neg-sq-distance: -|x - mu_c|^2.
template <class Scalar>
Scalar reward(const Point<Scalar>& x, int condition, const RewardSpec& spec) {
  if (condition < 0 || condition >= spec.num_conditions()) {
    throw ConfigError("reward: unknown condition " + std::to_string(condition));
  }
  const Scalar d2 = (x - spec.centers[std::size_t(condition)].template cast<Scalar>()).squaredNorm();
  if (spec.kind == RewardKind::GaussianBump) {
    const Scalar s = Scalar(spec.bandwidth);
    return std::exp(-d2 / (Scalar(2) * s * s));
  }
  return -d2;
}

/// values[t] = R(ODE completion of x_t), t = 0..T. values[0] scores the raw
/// rollout endpoint.
template <class Scalar>
using IntermediateRewards = std::vector<Scalar>;

/// Scores every state of a trajectory after completing it with the ODE.
///
/// The first Euler step of each completion reuses the velocity recorded at
/// rollout, and a state reached by an ODE step shares its completion with its
/// predecessor, so at most T (T - 1) / 2 extra field evaluations are made.
/// `field` must be the rollout field for that reuse to be exact.
template <class Scalar, flow::VelocityField<Scalar> Field>
IntermediateRewards<Scalar> evaluate_intermediate_rewards(const Field& field,
                                                          const flow::Trajectory<Scalar>& traj,
                                                          const RewardSpec& spec,
                                                          const flow::TimeGrid<Scalar>& grid) {
  const int steps = grid.steps();
  if (traj.num_steps() != steps || int(traj.states.size()) != steps + 1) {
    throw ContractError("trajectory length does not match the time grid");
  }
  IntermediateRewards<Scalar> values(std::size_t(steps + 1));
  values[0] = reward(traj.states[0], traj.condition, spec);
  for (int t = 1; t <= steps; ++t) {
    const auto& rec = traj.step(t);
    if (!rec.used_sde) {
      // x_{t-1} is exactly the first Euler step of this completion.
      values[std::size_t(t)] = values[std::size_t(t - 1)];
      continue;
    }
    const Point<Scalar> first = traj.states[std::size_t(t)] - grid.step_size(t) * rec.velocity;
    const Point<Scalar> done = flow::ode_complete(field, first, t - 1, grid, traj.condition);
    values[std::size_t(t)] = reward(done, traj.condition, spec);
  }
  return values;
}

inline std::string to_string(RewardKind kind) {
  return kind == RewardKind::GaussianBump ? "gaussian-bump" : "neg-sq-distance";
}

inline RewardKind reward_kind_from_string(const std::string& name) {
  if (name == "gaussian-bump") return RewardKind::GaussianBump;
  if (name == "neg-sq-distance") return RewardKind::NegSqDistance;
  throw ConfigError("reward.kind", "unknown reward kind '" + name + "'");
}

}  // namespace tpflow::reward
