// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tpflow/nn/tape.hpp"
#include "tpflow/types.hpp"

#include <cmath>
#include <cstdint>

namespace tpflow::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <class Scalar>
struct AdamState {
  Vector<Scalar> m;
  Vector<Scalar> v;
  std::int64_t step = 0;

  static AdamState zeros(Eigen::Index n) {
    return {Vector<Scalar>::Zero(n), Vector<Scalar>::Zero(n), 0};
  }
};

/// One bias-corrected Adam step that descends along `grad`.
/// A non-finite gradient leaves params and moments untouched and throws.
template <class Scalar>
void adam_step(AdamState<Scalar>& state, Vector<Scalar>& params, const Vector<Scalar>& grad,
               const AdamConfig& config) {
  if (state.m.size() != params.size() || state.v.size() != params.size() ||
      grad.size() != params.size()) {
    throw ConfigError("adam: moment, parameter and gradient lengths differ");
  }
  require_finite(grad, "adam gradient");

  const Scalar b1 = Scalar(config.beta1);
  const Scalar b2 = Scalar(config.beta2);
  ++state.step;
  state.m = b1 * state.m + (Scalar(1) - b1) * grad;
  state.v = b2 * state.v + (Scalar(1) - b2) * grad.cwiseAbs2();
  const Scalar m_corr = Scalar(1) - std::pow(b1, Scalar(state.step));
  const Scalar v_corr = Scalar(1) - std::pow(b2, Scalar(state.step));
  params.array() -= Scalar(config.lr) * (state.m.array() / m_corr) /
                    ((state.v.array() / v_corr).sqrt() + Scalar(config.eps));
}

}  // namespace tpflow::nn
