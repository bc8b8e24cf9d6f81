// SPDX-License-Identifier: Apache-2.0
#include "tpflow/grpo/credit.hpp"

#include <cmath>
#include <numeric>

namespace tpflow::grpo {

std::string to_string(Variant variant) {
  switch (variant) {
    case Variant::BaselineTerminal: return "flow-grpo";
    case Variant::TpUnconstrained: return "tp";
    case Variant::TpConstrained: return "tp-constrained";
  }
  return "unknown";
}

Variant variant_from_string(const std::string& name) {
  if (name == "flow-grpo" || name == "baseline") return Variant::BaselineTerminal;
  if (name == "tp") return Variant::TpUnconstrained;
  if (name == "tp-constrained") return Variant::TpConstrained;
  throw ConfigError("loss.variant", "unknown variant '" + name + "'");
}

std::string to_string(StepFlag flag) {
  switch (flag) {
    case StepFlag::None: return "none";
    case StepFlag::TurningPoint: return "turning_point";
    case StepFlag::FirstStepSelected: return "first_step_selected";
  }
  return "unknown";
}

std::vector<ReplacementCandidate> balance_replacements(std::span<const ReplacementCandidate> candidates) {
  std::vector<std::size_t> positive;
  std::vector<std::size_t> negative;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].aggregated > 0) positive.push_back(i);
    else if (candidates[i].aggregated < 0) negative.push_back(i);
  }
  const std::size_t m = std::min(positive.size(), negative.size());
  const auto by_magnitude = [&](std::size_t a, std::size_t b) {
    return std::abs(candidates[a].aggregated) > std::abs(candidates[b].aggregated);
  };
  std::stable_sort(positive.begin(), positive.end(), by_magnitude);
  std::stable_sort(negative.begin(), negative.end(), by_magnitude);

  std::vector<bool> keep(candidates.size(), false);
  for (std::size_t k = 0; k < m; ++k) {
    keep[positive[k]] = true;
    keep[negative[k]] = true;
  }
  std::vector<ReplacementCandidate> kept;
  kept.reserve(2 * m);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (keep[i]) kept.push_back(candidates[i]);
  }
  return kept;
}

}  // namespace tpflow::grpo
