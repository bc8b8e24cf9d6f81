// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tpflow/types.hpp"

#include <algorithm>
#include <string>
#include <vector>

namespace tpflow::flow {

/// Continuous times of a T-step sampler. Index t counts remaining denoising
/// steps: taus[T] is the noise end, taus[0] = 0 is the data end.
template <class Scalar>
class TimeGrid {
 public:
  static constexpr double kDefaultTauMax = 1.0 - 1e-3;

  /// taus[t] = tau_max * t / T.
  static TimeGrid uniform(int steps, Scalar tau_max = Scalar(kDefaultTauMax)) {
    if (steps < 1) throw ConfigError("sampler.steps", "must be at least 1");
    if (!(tau_max > Scalar(0) && tau_max < Scalar(1))) {
      throw ConfigError("sampler.tau_max", "must lie in (0, 1)");
    }
    std::vector<Scalar> taus(steps + 1);
    for (int t = 0; t <= steps; ++t) taus[t] = tau_max * Scalar(t) / Scalar(steps);
    return TimeGrid(std::move(taus));
  }

  explicit TimeGrid(std::vector<Scalar> taus) : taus_(std::move(taus)) {
    if (taus_.size() < 2) throw ConfigError("time grid needs at least one step");
    if (taus_.front() != Scalar(0)) throw ConfigError("time grid must start at tau = 0");
    if (!(taus_.back() < Scalar(1))) throw ConfigError("time grid must end below tau = 1");
    for (std::size_t i = 1; i < taus_.size(); ++i) {
      if (!(taus_[i] > taus_[i - 1])) throw ConfigError("time grid must be strictly increasing in t");
    }
  }

  int steps() const { return int(taus_.size()) - 1; }
  Scalar tau(int t) const { return taus_.at(std::size_t(t)); }
  Scalar tau_max() const { return taus_.back(); }

  /// Step magnitude of the transition x_t -> x_{t-1}.
  Scalar step_size(int t) const { return tau(t) - tau(t - 1); }

  /// Largest tau admitted in the denominator of the noise schedule. The noise
  /// end is evaluated with the next grid point, so sigma stays bounded as
  /// tau_max approaches 1.
  Scalar sigma_tau_cap() const { return steps() >= 2 ? tau(steps() - 1) : tau_max(); }

  const std::vector<Scalar>& taus() const { return taus_; }

 private:
  std::vector<Scalar> taus_;
};

}  // namespace tpflow::flow
