// SPDX-License-Identifier: Apache-2.0
//
// Step-level credit assignment over a trajectory's intermediate rewards.
//
// Every per-step array is indexed by t (entry 0 unused) so that entry t
// describes the denoising transition x_t -> x_{t-1}. values[t] is the reward of
// the ODE completion of x_t; values[0] scores the rollout endpoint and
// values[T] the pure-ODE sample from the same noise.

#pragma once

#include "tpflow/types.hpp"

#include <algorithm>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace tpflow::grpo {

/// sign(0) == 0, so ties never satisfy a strict sign condition.
template <class Scalar>
constexpr int sign(Scalar v) {
  return (Scalar(0) < v) - (v < Scalar(0));
}

enum class Variant {
  BaselineTerminal,  // terminal reward at every step
  TpUnconstrained,   // turning points checked against values[0] - values[t]
  TpConstrained,     // turning points checked against values[0] - values[t-1]
};

std::string to_string(Variant variant);
Variant variant_from_string(const std::string& name);

namespace detail {
template <class Scalar>
int steps_of(std::span<const Scalar> values) {
  if (values.size() < 2) throw ContractError("reward sequence needs at least two entries");
  return int(values.size()) - 1;
}
}  // namespace detail

/// r[t] = values[t-1] - values[t].
template <class Scalar>
std::vector<Scalar> step_increments(std::span<const Scalar> values) {
  const int steps = detail::steps_of(values);
  std::vector<Scalar> r(std::size_t(steps + 1), Scalar(0));
  for (int t = 1; t <= steps; ++t) r[std::size_t(t)] = values[std::size_t(t - 1)] - values[std::size_t(t)];
  return r;
}

/// Sign of the whole trajectory's reward change, sign(values[0] - values[T]).
template <class Scalar>
int overall_trend(std::span<const Scalar> values) {
  return sign(values.front() - values.back());
}

/// s[t] = sign(values[t-1] - values[t]) * sign(values[0] - values[T]).
template <class Scalar>
std::vector<int> trend_signs(std::span<const Scalar> values) {
  const int steps = detail::steps_of(values);
  const int overall = overall_trend(values);
  std::vector<int> s(std::size_t(steps + 1), 0);
  for (int t = 1; t <= steps; ++t) {
    s[std::size_t(t)] = sign(values[std::size_t(t - 1)] - values[std::size_t(t)]) * overall;
  }
  return s;
}

/// values[0] - values[t]: reward gained from x_t's completion to the rollout endpoint.
template <class Scalar>
Scalar aggregated_reward(std::span<const Scalar> values, int t) {
  const int steps = detail::steps_of(values);
  if (t < 1 || t > steps) throw ContractError("aggregated_reward: t outside [1, T]");
  return values.front() - values[std::size_t(t)];
}

/// Turning-point test for one step. A turning point flips a locally
/// disagreeing trend (s[t+1] < 0) into agreement (s[t] > 0) and its local
/// change agrees with the change still to come.
template <class Scalar>
bool is_turning_point(std::span<const Scalar> values, int t, Variant variant) {
  const int steps = detail::steps_of(values);
  if (t < 1 || t > steps - 1) return false;
  const int overall = overall_trend(values);
  const auto at = [&](int k) { return values[std::size_t(k)]; };
  const int local = sign(at(t - 1) - at(t));
  const int s_t = local * overall;
  const int s_next = sign(at(t) - at(t + 1)) * overall;
  if (!(s_next < 0 && s_t > 0)) return false;
  switch (variant) {
    case Variant::TpUnconstrained:
      return local * sign(values.front() - at(t)) > 0;
    case Variant::TpConstrained:
      return local * sign(values.front() - at(t - 1)) > 0;
    case Variant::BaselineTerminal:
      break;
  }
  throw ContractError("turning points are undefined for the baseline variant");
}

/// All turning points in increasing t. `eligible(t)` restricts candidacy to
/// optimized steps; by default every step is eligible.
template <class Scalar>
std::vector<int> detect_turning_points(std::span<const Scalar> values, Variant variant,
                                       const std::function<bool(int)>& eligible = {}) {
  if (variant == Variant::BaselineTerminal) {
    throw ContractError("turning points are undefined for the baseline variant");
  }
  const int steps = detail::steps_of(values);
  std::vector<int> points;
  for (int t = 1; t <= steps - 1; ++t) {
    if (eligible && !eligible(t)) continue;
    if (is_turning_point(values, t, variant)) points.push_back(t);
  }
  return points;
}

/// The first denoising step qualifies when its local change agrees with the
/// overall change: sign(values[T-1] - values[T]) * sign(values[0] - values[T]) > 0.
template <class Scalar>
bool select_first_step(std::span<const Scalar> values) {
  const int steps = detail::steps_of(values);
  const Scalar last = values[std::size_t(steps)];
  return sign(values[std::size_t(steps - 1)] - last) * sign(values.front() - last) > 0;
}

enum class StepFlag { None, TurningPoint, FirstStepSelected };

std::string to_string(StepFlag flag);

struct CreditConfig {
  Variant variant = Variant::TpUnconstrained;
  bool first_step_rule = true;
};

template <class Scalar>
struct StepRewardTable {
  std::vector<Scalar> values;      // t = 0..T
  std::vector<Scalar> increments;  // r[t]
  int trend_sign = 0;
  std::vector<int> s;
  std::vector<StepFlag> flags;
  std::vector<Scalar> effective;  // reward fed to the advantage at step t
  std::vector<bool> optimized;    // step t enters the objective

  int steps() const { return int(values.size()) - 1; }

  /// Drops a replacement and restores the local increment.
  void revert(int t) {
    flags[std::size_t(t)] = StepFlag::None;
    effective[std::size_t(t)] = increments[std::size_t(t)];
  }
};

/// Assigns the effective reward of every step.
///
/// Baseline: the terminal reward values[0] at every step. TP variants: the
/// increment r[t], replaced by values[0] - values[t] at turning points and, with
/// the first-step rule, at t = T when select_first_step holds. Only steps with
/// `optimized[t]` are candidates for replacement.
template <class Scalar>
StepRewardTable<Scalar> build_step_table(std::span<const Scalar> values, const CreditConfig& config,
                                         std::vector<bool> optimized) {
  const int steps = detail::steps_of(values);
  if (int(optimized.size()) != steps + 1) throw ContractError("optimized mask must have T + 1 entries");

  StepRewardTable<Scalar> table;
  table.values.assign(values.begin(), values.end());
  table.increments = step_increments(values);
  table.trend_sign = overall_trend(values);
  table.s = trend_signs(values);
  table.flags.assign(std::size_t(steps + 1), StepFlag::None);
  table.optimized = std::move(optimized);
  table.optimized[0] = false;

  if (config.variant == Variant::BaselineTerminal) {
    table.effective.assign(std::size_t(steps + 1), values.front());
    return table;
  }
  table.effective = table.increments;
  const auto eligible = [&](int t) { return bool(table.optimized[std::size_t(t)]); };
  for (int t : detect_turning_points(values, config.variant, eligible)) {
    table.flags[std::size_t(t)] = StepFlag::TurningPoint;
    table.effective[std::size_t(t)] = aggregated_reward(values, t);
  }
  if (config.first_step_rule && eligible(steps) && select_first_step(values)) {
    table.flags[std::size_t(steps)] = StepFlag::FirstStepSelected;
    table.effective[std::size_t(steps)] = aggregated_reward(values, steps);
  }
  return table;
}

struct ReplacementCandidate {
  std::size_t trajectory = 0;
  int t = 0;
  double aggregated = 0;  // r_agg at that step
};

/// Keeps m = min(#positive, #negative) candidates of each sign, the m largest
/// |r_agg| within each sign. Ties in magnitude keep the earlier candidate.
/// Returns the kept candidates in input order.
std::vector<ReplacementCandidate> balance_replacements(std::span<const ReplacementCandidate> candidates);

/// Collects the flagged steps of `tables` (restricted to step t when t > 0)
/// and reverts every replacement that balance_replacements drops.
/// Returns the number of replacements kept.
template <class Scalar>
std::size_t balance_tables(std::span<StepRewardTable<Scalar>> tables, int only_t = 0) {
  std::vector<ReplacementCandidate> candidates;
  for (std::size_t i = 0; i < tables.size(); ++i) {
    const auto& table = tables[i];
    for (int t = 1; t <= table.steps(); ++t) {
      if (only_t > 0 && t != only_t) continue;
      if (table.flags[std::size_t(t)] == StepFlag::None) continue;
      candidates.push_back({i, t, double(table.effective[std::size_t(t)])});
    }
  }
  const auto kept = balance_replacements(candidates);
  std::size_t k = 0;
  for (const auto& c : candidates) {
    if (k < kept.size() && kept[k].trajectory == c.trajectory && kept[k].t == c.t) {
      ++k;
      continue;
    }
    tables[c.trajectory].revert(c.t);
  }
  return kept.size();
}

}  // namespace tpflow::grpo
