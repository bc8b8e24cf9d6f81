// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>

namespace tpflow::grpo {

/// Randomized check of the sign and magnitude guarantees of turning points on
/// i.i.d. U(0, 1) reward sequences without ties.
struct LemmaSuiteReport {
  int sequences = 0;
  int steps = 0;
  std::size_t unconstrained_points = 0;
  std::size_t constrained_points = 0;
  std::size_t first_steps = 0;
  std::size_t unconstrained_sign_violations = 0;  // r * r_agg <= 0
  std::size_t constrained_sign_violations = 0;
  std::size_t constrained_magnitude_violations = 0;  // |r_agg| <= |r|
  std::size_t subset_violations = 0;                 // constrained point not unconstrained
  std::size_t affine_invariance_violations = 0;      // detection changes under a*v + b, a > 0

  std::size_t violations() const {
    return unconstrained_sign_violations + constrained_sign_violations + constrained_magnitude_violations +
           subset_violations + affine_invariance_violations;
  }
  bool passed() const { return violations() == 0; }
};

LemmaSuiteReport run_lemma_suite(int sequences, int steps, std::uint64_t seed);

}  // namespace tpflow::grpo
