// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tpflow/grpo/credit.hpp"
#include "tpflow/types.hpp"

#include <cmath>
#include <span>

namespace tpflow::grpo {

inline constexpr double kAdvantageStdGuard = 1e-8;

/// Group-normalized advantages, one row per trajectory and one column per step
/// (column t - 1 holds step t). Each column is normalized on its own:
/// (e - mean) / (population std + 1e-8). A column whose effective rewards are
/// all equal gets zero advantage.
template <class Scalar>
Matrix<Scalar> compute_advantages(std::span<const StepRewardTable<Scalar>> group) {
  if (group.size() < 2) throw ConfigError("loss.group_size", "a group needs at least two trajectories");
  const int steps = group.front().steps();
  for (const auto& table : group) {
    if (table.steps() != steps) throw ContractError("group members disagree on the step count");
  }
  const auto g = Eigen::Index(group.size());
  Matrix<Scalar> adv = Matrix<Scalar>::Zero(g, steps);
  Vector<Scalar> e(g);
  for (int t = 1; t <= steps; ++t) {
    for (Eigen::Index i = 0; i < g; ++i) e(i) = group[std::size_t(i)].effective[std::size_t(t)];
    if (e.maxCoeff() == e.minCoeff()) continue;
    const Scalar mean = e.mean();
    const Scalar std = std::sqrt((e.array() - mean).square().mean());
    adv.col(t - 1) = (e.array() - mean) / (std + Scalar(kAdvantageStdGuard));
  }
  return adv;
}

}  // namespace tpflow::grpo
