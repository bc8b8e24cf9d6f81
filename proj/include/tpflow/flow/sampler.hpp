// SPDX-License-Identifier: Apache-2.0
//
// Euler ODE and Euler-Maruyama SDE samplers for a rectified-flow velocity
// field.
//
// Convention: x_tau = (1 - tau) x_data + tau * noise, and the field regresses
// (noise - data). Denoising therefore moves along -v with a positive step
// magnitude h = tau_t - tau_{t-1}.

#pragma once

#include "tpflow/flow/time_grid.hpp"
#include "tpflow/nn/mlp.hpp"
#include "tpflow/types.hpp"

#include <cmath>
#include <concepts>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace tpflow::flow {

/// Anything callable as v(x, tau, condition) -> point.
template <class F, class Scalar>
concept VelocityField = requires(const F& f, const Point<Scalar>& x, Scalar tau, int c) {
  { f(x, tau, c) } -> std::convertible_to<Point<Scalar>>;
};

/// A network bound to one parameter vector.
template <class Scalar>
class VelocityModel {
 public:
  VelocityModel(const nn::Mlp<Scalar>& mlp, const Vector<Scalar>& params)
      : mlp_(&mlp), params_(&params) {}

  Point<Scalar> operator()(const Point<Scalar>& x, Scalar tau, int condition) const {
    return mlp_->velocity(*params_, x, tau, condition);
  }

  const nn::Mlp<Scalar>& mlp() const { return *mlp_; }
  const Vector<Scalar>& params() const { return *params_; }

 private:
  const nn::Mlp<Scalar>* mlp_;
  const Vector<Scalar>* params_;
};

/// sigma_tau = alpha * sqrt(tau / (1 - min(tau, tau_cap))).
template <class Scalar>
Scalar sde_sigma(Scalar alpha, Scalar tau, Scalar tau_cap = Scalar(1)) {
  if (alpha == Scalar(0)) return Scalar(0);
  return alpha * std::sqrt(tau / (Scalar(1) - std::min(tau, tau_cap)));
}

/// Transition mean x - h [v + sigma^2 / (2 tau) (x + (1 - tau) v)].
template <class Scalar>
Point<Scalar> sde_mean(const Point<Scalar>& x, const Point<Scalar>& v, Scalar tau, Scalar h,
                       Scalar sigma) {
  if (sigma == Scalar(0)) return x - h * v;
  const Scalar c = sigma * sigma / (Scalar(2) * tau);
  return x - h * (v + c * (x + (Scalar(1) - tau) * v));
}

/// d(mean)/d(v), a multiple of the identity.
template <class Scalar>
Scalar sde_mean_velocity_gain(Scalar tau, Scalar h, Scalar sigma) {
  const Scalar c = sigma * sigma / (Scalar(2) * tau);
  return -h * (Scalar(1) + c * (Scalar(1) - tau));
}

/// log N(x; mean, std^2 I) in kStateDim dimensions.
template <class Scalar>
Scalar gaussian_log_density(const Point<Scalar>& x, const Point<Scalar>& mean, Scalar std) {
  const Scalar var = std * std;
  return -(x - mean).squaredNorm() / (Scalar(2) * var) -
         Scalar(0.5) * Scalar(kStateDim) * std::log(Scalar(2) * std::numbers::pi_v<Scalar> * var);
}

template <class Scalar, class Rng>
Point<Scalar> standard_normal_point(Rng& rng) {
  std::normal_distribution<Scalar> normal(Scalar(0), Scalar(1));
  Point<Scalar> p;
  for (int i = 0; i < kStateDim; ++i) p(i) = normal(rng);
  return p;
}

namespace detail {
template <class Scalar>
void check_step(Scalar tau, Scalar h) {
  if (!(h > Scalar(0))) throw ContractError("step magnitude must be positive");
  if (tau - h < Scalar(-1e-12)) throw ContractError("step would cross tau = 0");
}
}  // namespace detail

/// Euler step toward the data end.
template <class Scalar, VelocityField<Scalar> Field>
Point<Scalar> ode_step(const Field& field, const Point<Scalar>& x, Scalar tau, Scalar h,
                       int condition) {
  detail::check_step(tau, h);
  return x - h * Point<Scalar>(field(x, tau, condition));
}

template <class Scalar>
struct SdeStep {
  Point<Scalar> next;
  Point<Scalar> mean;
  Scalar std = 0;    // sigma * sqrt(h)
  Scalar sigma = 0;  // diffusion coefficient at tau
  Point<Scalar> noise;
  Point<Scalar> velocity;  // v(x, tau, c) used by the drift
};

/// Euler-Maruyama step: next = mean + sigma sqrt(h) eps.
template <class Scalar, VelocityField<Scalar> Field, class Rng>
SdeStep<Scalar> sde_step(const Field& field, const Point<Scalar>& x, Scalar tau, Scalar h,
                         Scalar alpha, Rng& rng, int condition, Scalar tau_cap = Scalar(1)) {
  if (!(tau > Scalar(0) && tau < Scalar(1))) {
    throw ContractError("sde_step requires tau in (0, 1), got " + std::to_string(double(tau)));
  }
  detail::check_step(tau, h);
  SdeStep<Scalar> out;
  out.velocity = field(x, tau, condition);
  out.sigma = sde_sigma(alpha, tau, tau_cap);
  out.mean = sde_mean(x, out.velocity, tau, h, out.sigma);
  out.std = out.sigma * std::sqrt(h);
  out.noise = standard_normal_point<Scalar>(rng);
  out.next = out.std == Scalar(0) ? out.mean : Point<Scalar>(out.mean + out.std * out.noise);
  return out;
}

template <class Scalar>
struct SamplerConfig {
  Scalar alpha = Scalar(0.7);
  TimeGrid<Scalar> grid = TimeGrid<Scalar>::uniform(10);
  int sde_window = 10;  // leading denoising steps that use the SDE
  bool final_step_sde = false;

  /// Whether the transition x_t -> x_{t-1} is stochastic.
  bool uses_sde(int t) const {
    const int steps = grid.steps();
    if (t < 1 || t > steps) return false;
    if (t == 1 && !final_step_sde) return false;
    return steps - t < sde_window;
  }

  void validate() const {
    if (!std::isfinite(alpha) || alpha < Scalar(0)) {
      throw ConfigError("sampler.alpha", "must be finite and non-negative");
    }
    if (sde_window < 0 || sde_window > grid.steps()) {
      throw ConfigError("sampler.window", "must lie in [0, steps]");
    }
  }
};

template <class Scalar>
struct StepRecord {
  bool used_sde = false;
  Point<Scalar> velocity = Point<Scalar>::Zero();  // v(x_t, tau_t, c) at rollout params
  Point<Scalar> mean = Point<Scalar>::Zero();
  Scalar sigma = 0;
  Scalar std = 0;
  Point<Scalar> noise = Point<Scalar>::Zero();
  Scalar log_prob = 0;  // rollout log-density of x_{t-1}; 0 for ODE steps
};

template <class Scalar>
struct Trajectory {
  int condition = 0;
  std::uint64_t seed = 0;
  std::vector<Point<Scalar>> states;    // states[t] = x_t, t = 0..T
  std::vector<StepRecord<Scalar>> steps;  // steps[t - 1] describes x_t -> x_{t-1}

  int num_steps() const { return int(steps.size()); }
  const StepRecord<Scalar>& step(int t) const { return steps.at(std::size_t(t - 1)); }
  StepRecord<Scalar>& step(int t) { return steps.at(std::size_t(t - 1)); }
};

/// Rolls out x_T ~ N(0, I) to x_0, using the SDE inside the configured window.
template <class Scalar, VelocityField<Scalar> Field>
Trajectory<Scalar> sample_trajectory(const Field& field, int condition,
                                     const SamplerConfig<Scalar>& config, std::uint64_t seed) {
  config.validate();
  const auto& grid = config.grid;
  const int steps = grid.steps();
  std::mt19937_64 rng(seed);

  Trajectory<Scalar> traj;
  traj.condition = condition;
  traj.seed = seed;
  traj.states.resize(std::size_t(steps + 1));
  traj.steps.resize(std::size_t(steps));
  traj.states[std::size_t(steps)] = standard_normal_point<Scalar>(rng);

  for (int t = steps; t >= 1; --t) {
    const Point<Scalar>& x = traj.states[std::size_t(t)];
    const Scalar tau = grid.tau(t);
    const Scalar h = grid.step_size(t);
    StepRecord<Scalar>& rec = traj.step(t);
    if (config.uses_sde(t)) {
      const auto s = sde_step(field, x, tau, h, config.alpha, rng, condition, grid.sigma_tau_cap());
      rec.used_sde = true;
      rec.velocity = s.velocity;
      rec.mean = s.mean;
      rec.sigma = s.sigma;
      rec.std = s.std;
      rec.noise = s.noise;
      traj.states[std::size_t(t - 1)] = s.next;
      rec.log_prob = s.std > Scalar(0) ? gaussian_log_density(s.next, s.mean, s.std) : Scalar(0);
    } else {
      rec.used_sde = false;
      rec.velocity = field(x, tau, condition);
      rec.mean = x - h * rec.velocity;
      traj.states[std::size_t(t - 1)] = rec.mean;
    }
  }
  return traj;
}

/// Runs the t remaining Euler steps from (x_t, taus[t]) down to tau = 0.
template <class Scalar, VelocityField<Scalar> Field>
Point<Scalar> ode_complete(const Field& field, const Point<Scalar>& x_t, int t,
                           const TimeGrid<Scalar>& grid, int condition) {
  if (t < 0 || t > grid.steps()) throw ContractError("ode_complete: step index out of range");
  Point<Scalar> x = x_t;
  for (int k = t; k >= 1; --k) x = ode_step(field, x, grid.tau(k), grid.step_size(k), condition);
  return x;
}

/// Log-density of states[t-1] given states[t] under the field's transition
/// mean and the recorded (policy-independent) noise scale.
template <class Scalar, VelocityField<Scalar> Field>
Scalar transition_log_prob(const Field& field, const Trajectory<Scalar>& traj,
                           const TimeGrid<Scalar>& grid, int t) {
  const StepRecord<Scalar>& rec = traj.step(t);
  if (!(rec.std > Scalar(0))) {
    throw ContractError("transition_log_prob: step " + std::to_string(t) + " carries no likelihood");
  }
  const Point<Scalar>& x = traj.states[std::size_t(t)];
  const Scalar tau = grid.tau(t);
  const Point<Scalar> v = field(x, tau, traj.condition);
  const Point<Scalar> mean = sde_mean(x, v, tau, grid.step_size(t), rec.sigma);
  return gaussian_log_density(traj.states[std::size_t(t - 1)], mean, rec.std);
}

}  // namespace tpflow::flow
