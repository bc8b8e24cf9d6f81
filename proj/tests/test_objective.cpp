// SPDX-License-Identifier: Apache-2.0
#include "oracles.hpp"

#include "tpflow/grpo/objective.hpp"

#include <doctest.h>

#include <random>

using namespace tpflow;
using grpo::LossConfig;
using grpo::OptimizedStep;

namespace {

struct Setup {
  nn::Mlp<double> mlp{nn::MlpSpec::velocity_field(2, {12, 12})};
  VectorXd old_params;
  flow::SamplerConfig<double> sampler;
  std::vector<flow::Trajectory<double>> trajectories;

  explicit Setup(std::uint64_t seed, int n = 6) {
    std::mt19937_64 rng(seed);
    old_params.resize(mlp.param_count());
    for (auto& v : old_params) v = std::normal_distribution<double>(0, 0.4)(rng);
    const flow::VelocityModel<double> field(mlp, old_params);
    for (int i = 0; i < n; ++i) trajectories.push_back(flow::sample_trajectory(field, i % 2, sampler, seed * 100 + i));
  }

  std::vector<OptimizedStep<double>> batch(const std::vector<double>& adv) const {
    std::vector<OptimizedStep<double>> out;
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
      for (int t = 10; t >= 2; --t) out.push_back({&trajectories[i], i, t, adv[(i * 9 + std::size_t(t)) % adv.size()]});
    }
    return out;
  }

  VectorXd perturbed(double scale, std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    VectorXd p = old_params;
    for (auto& v : p) v += std::normal_distribution<double>(0, scale)(rng);
    return p;
  }
};

std::vector<double> to_std(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

TEST_CASE("on-policy objective is the mean advantage") {
  const Setup s(1);
  const std::vector<double> adv{0.3, -1.2, 0.8, 0.1, -0.4};
  const auto batch = s.batch(adv);
  LossConfig cfg;
  cfg.kl_beta = 0;
  const auto value = grpo::grpo_objective<double>(s.mlp, s.old_params, nullptr, batch, s.sampler.grid, cfg);
  double mean = 0;
  for (const auto& step : batch) mean += step.advantage;
  mean /= double(batch.size());
  CHECK(value.objective == doctest::Approx(mean).epsilon(1e-12));
  CHECK(value.mean_ratio == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(value.clipped == 0);
}

TEST_CASE("objective gradient agrees with finite differences") {
  const Setup s(2);
  const auto batch = s.batch({0.7, -0.3, 1.1, -1.4});
  LossConfig cfg;
  cfg.kl_beta = 0.05;
  const VectorXd ref = s.perturbed(0.03, 7);
  const VectorXd params = s.perturbed(0.01, 8);
  const auto value = grpo::grpo_objective<double>(s.mlp, params, &ref, batch, s.sampler.grid, cfg);
  CHECK(value.clipped == 0);
  CHECK(value.kl > 0);
  const auto f = [&](const std::vector<double>& q) {
    const VectorXd p = Eigen::Map<const VectorXd>(q.data(), Eigen::Index(q.size()));
    return -grpo::grpo_objective<double>(s.mlp, p, &ref, batch, s.sampler.grid, cfg, false).objective;
  };
  CHECK(oracle::relative_error(to_std(value.gradient), oracle::fd_gradient(f, to_std(params))) < 1e-5);
}

TEST_CASE("zero advantages and no penalty give a zero gradient") {
  const Setup s(3);
  const auto batch = s.batch({0.0});
  LossConfig cfg;
  cfg.kl_beta = 0;
  const auto value = grpo::grpo_objective<double>(s.mlp, s.perturbed(0.02, 1), nullptr, batch, s.sampler.grid, cfg);
  CHECK(value.gradient.isZero(0));
  CHECK(value.objective == 0.0);
}

TEST_CASE("penalty vanishes at the reference") {
  const Setup s(4);
  const auto batch = s.batch({0.5, -0.5});
  LossConfig cfg;
  cfg.kl_beta = 0.3;
  const auto value = grpo::grpo_objective<double>(s.mlp, s.old_params, &s.old_params, batch, s.sampler.grid, cfg);
  CHECK(value.kl == 0.0);
  CHECK(value.objective == value.surrogate);
  CHECK_THROWS_AS(grpo::grpo_objective<double>(s.mlp, s.old_params, nullptr, batch, s.sampler.grid, cfg), ContractError);
}

TEST_CASE("clipped branch is flat") {
  // Move the parameters along the ascent direction of one positive-advantage
  // step until its ratio exceeds 1 + eps.
  const Setup s(5, 1);
  std::vector<OptimizedStep<double>> batch{{&s.trajectories[0], 0, 6, 1.0}};
  LossConfig cfg;
  cfg.kl_beta = 0;
  cfg.clip_eps = 0.2;
  VectorXd params = s.old_params;
  grpo::ObjectiveValue<double> value;
  for (int i = 0; i < 200; ++i) {
    value = grpo::grpo_objective<double>(s.mlp, params, nullptr, batch, s.sampler.grid, cfg);
    if (value.mean_ratio > 1.2) break;
    params -= 0.01 * value.gradient / std::max(value.gradient.norm(), 1e-12);
  }
  value = grpo::grpo_objective<double>(s.mlp, params, nullptr, batch, s.sampler.grid, cfg);
  REQUIRE(value.mean_ratio > 1.2);
  CHECK(value.clipped == 1);
  CHECK(value.objective == doctest::Approx(1.2));
  CHECK(value.gradient.isZero(0));
}

TEST_CASE("deterministic steps cannot be optimized") {
  const Setup s(6, 1);
  std::vector<OptimizedStep<double>> batch{{&s.trajectories[0], 0, 1, 1.0}};
  CHECK_THROWS_AS(grpo::grpo_objective<double>(s.mlp, s.old_params, nullptr, batch, s.sampler.grid, LossConfig{}), ContractError);
  LossConfig bad;
  bad.clip_eps = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
