// SPDX-License-Identifier: Apache-2.0
#include "tpflow/grpo/lemma_suite.hpp"

#include "tpflow/grpo/credit.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace tpflow::grpo {

LemmaSuiteReport run_lemma_suite(int sequences, int steps, std::uint64_t seed) {
  if (steps < 2) throw ConfigError("lemma suite needs at least two steps");
  LemmaSuiteReport report;
  report.sequences = sequences;
  report.steps = steps;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> scale(0.1, 10.0);
  std::uniform_real_distribution<double> shift(-5.0, 5.0);
  std::vector<double> values(std::size_t(steps + 1));
  std::vector<double> transformed(values.size());

  for (int n = 0; n < sequences;) {
    for (double& v : values) v = unit(rng);
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) continue;  // ties excluded
    ++n;

    const std::span<const double> view(values);
    const auto r = step_increments(view);
    const auto loose = detect_turning_points(view, Variant::TpUnconstrained);
    const auto strict = detect_turning_points(view, Variant::TpConstrained);
    report.unconstrained_points += loose.size();
    report.constrained_points += strict.size();
    report.first_steps += select_first_step(view) ? 1 : 0;

    for (int t : loose) {
      if (!(r[std::size_t(t)] * aggregated_reward(view, t) > 0)) ++report.unconstrained_sign_violations;
    }
    for (int t : strict) {
      const double agg = aggregated_reward(view, t);
      if (!(r[std::size_t(t)] * agg > 0)) ++report.constrained_sign_violations;
      if (!(std::abs(agg) > std::abs(r[std::size_t(t)]))) ++report.constrained_magnitude_violations;
      if (std::find(loose.begin(), loose.end(), t) == loose.end()) ++report.subset_violations;
    }

    const double a = scale(rng);
    const double b = shift(rng);
    for (std::size_t i = 0; i < values.size(); ++i) transformed[i] = a * values[i] + b;
    const std::span<const double> tview(transformed);
    if (detect_turning_points(tview, Variant::TpUnconstrained) != loose ||
        detect_turning_points(tview, Variant::TpConstrained) != strict ||
        select_first_step(tview) != select_first_step(view)) {
      ++report.affine_invariance_violations;
    }
  }
  return report;
}

}  // namespace tpflow::grpo
