// SPDX-License-Identifier: Apache-2.0
#include "oracles.hpp"

#include "tpflow/nn/adam.hpp"
#include "tpflow/nn/checkpoint.hpp"
#include "tpflow/nn/mlp.hpp"
#include "tpflow/nn/tape.hpp"

#include <doctest.h>

#include <filesystem>
#include <limits>
#include <random>

using namespace tpflow;
using nn::Activation;
using nn::Mlp;
using nn::MlpSpec;

namespace {

std::vector<double> to_std(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }
VectorXd to_eigen(const std::vector<double>& v) { return Eigen::Map<const VectorXd>(v.data(), Eigen::Index(v.size())); }

VectorXd random_params(const Mlp<double>& mlp, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 0.5);
  VectorXd p(mlp.param_count());
  for (auto& x : p) x = n(rng);
  return p;
}

}  // namespace

TEST_CASE("fresh velocity field outputs zero") {
  const Mlp<double> mlp(MlpSpec::velocity_field(4, {16, 16}));
  std::mt19937_64 rng(3);
  const VectorXd p = mlp.init_params(rng);
  CHECK(mlp.velocity(p, Point2(0.3, -1.2), 0.4, 2).isZero(0));
  CHECK(mlp.velocity(p, Point2(5.0, 5.0), 0.9, 0).isZero(0));
}

TEST_CASE("forward matches a plain-loop oracle") {
  std::mt19937_64 rng(11);
  for (Activation act : {Activation::Tanh, Activation::SmoothRelu}) {
    const MlpSpec spec{7, {5, 3}, 2, act};
    const Mlp<double> mlp(spec);
    const VectorXd p = random_params(mlp, rng);
    const std::vector<double> x{0.1, -0.7, 1.3, 0.25, -2.0, 0.0, 1.0};
    const auto want = oracle::mlp_forward(spec, to_std(p), x);
    const VectorXd got = mlp.forward(p, Matrix<double>(to_eigen(x)));
    CHECK(got(0) == doctest::Approx(want[0]).epsilon(1e-13));
    CHECK(got(1) == doctest::Approx(want[1]).epsilon(1e-13));
  }
}

TEST_CASE("single affine layer by hand") {
  const MlpSpec spec = MlpSpec::velocity_field(1, {1});
  const Mlp<double> mlp(spec);
  VectorXd p = VectorXd::Zero(mlp.param_count());
  mlp.weights(p, 0)(0, 0) = 0.5;       // h = tanh(0.5 x + 0.1)
  mlp.bias(p, 0)(0) = 0.1;
  mlp.weights(p, 1) << 2.0, -1.0;      // out = (2h + 0.3, -h - 0.2)
  mlp.bias(p, 1) << 0.3, -0.2;
  const double h = std::tanh(0.5 * 0.8 + 0.1);
  Matrix<double> in = Matrix<double>::Zero(spec.input_dim, 1);
  in(0, 0) = 0.8;
  const VectorXd out = mlp.forward(p, in);
  CHECK(out(0) == doctest::Approx(2 * h + 0.3));
  CHECK(out(1) == doctest::Approx(-h - 0.2));
}

TEST_CASE("reverse-mode gradient agrees with finite differences") {
  std::mt19937_64 rng(5);
  for (Activation act : {Activation::Tanh, Activation::SmoothRelu}) {
    const MlpSpec spec = MlpSpec::velocity_field(3, {6, 4}, act);
    const Mlp<double> mlp(spec);
    const VectorXd p = random_params(mlp, rng);
    const Point2 x(0.4, -0.9);
    const Point2 w(1.5, -0.5);
    const auto input = nn::velocity_input(x, 0.37, 1, 3);
    const auto loss = [&](const std::vector<double>& q) {
      const auto out = oracle::mlp_forward(spec, q, to_std(input));
      return w(0) * out[0] + w(1) * out[1] + out[0] * out[1];
    };
    const auto [value, grad] = nn::value_and_gradient(mlp, p, [&](nn::Tape<double>& tape) {
      const auto rec = tape.velocity(x, 0.37, 1);
      const Point2 v = rec.output;
      tape.seed(rec.id, Matrix<double>(w + Point2(v(1), v(0))));
      return w.dot(v) + v(0) * v(1);
    });
    CHECK(value == doctest::Approx(loss(to_std(p))));
    CHECK(oracle::relative_error(to_std(grad), oracle::fd_gradient(loss, to_std(p))) < 1e-7);
  }
}

TEST_CASE("batched backward sums per-column gradients") {
  std::mt19937_64 rng(9);
  const Mlp<double> mlp(MlpSpec{6, {4}, 2, Activation::Tanh});
  const VectorXd p = random_params(mlp, rng);
  Matrix<double> in = Matrix<double>::Random(6, 5);
  Matrix<double> seed = Matrix<double>::Random(2, 5);
  typename Mlp<double>::Cache cache;
  mlp.forward(p, in, cache);
  VectorXd batched;
  mlp.backward(p, cache, seed, batched);
  VectorXd summed = VectorXd::Zero(mlp.param_count());
  for (int j = 0; j < 5; ++j) {
    mlp.forward(p, in.col(j), cache);
    mlp.backward(p, cache, seed.col(j), summed);
  }
  CHECK((batched - summed).norm() < 1e-12);
}

TEST_CASE("bad condition or shape is a configuration error") {
  const Mlp<double> mlp(MlpSpec::velocity_field(2, {4}));
  const VectorXd p = VectorXd::Zero(mlp.param_count());
  CHECK_THROWS_AS(mlp.velocity(p, Point2::Zero(), 0.5, 2), ConfigError);
  CHECK_THROWS_AS(mlp.forward(VectorXd::Zero(3), Matrix<double>::Zero(7, 1)), ConfigError);
  CHECK_THROWS_AS(Mlp<double>(MlpSpec{7, {}, 2, Activation::Tanh}), ConfigError);
}

TEST_CASE("adam first steps by hand") {
  VectorXd p(2);
  p << 1.0, -2.0;
  VectorXd g(2);
  g << 0.5, -4.0;
  auto state = nn::AdamState<double>::zeros(2);
  const nn::AdamConfig cfg{0.1, 0.9, 0.999, 1e-8};
  nn::adam_step(state, p, g, cfg);
  // Bias correction makes the first step lr * sign(g) up to eps.
  CHECK(p(0) == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)).epsilon(1e-12));
  CHECK(p(1) == doctest::Approx(-2.0 + 0.1 * 4.0 / (4.0 + 1e-8)).epsilon(1e-12));

  VectorXd g2(2);
  g2 << 1.5, 0.0;
  nn::adam_step(state, p, g2, cfg);
  const double m = (0.9 * 0.05 + 0.1 * 1.5) / (1 - 0.81);
  const double v = (0.999 * 0.001 * 0.25 + 0.001 * 2.25) / (1 - 0.999 * 0.999);
  CHECK(p(0) == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8) - 0.1 * m / (std::sqrt(v) + 1e-8)).epsilon(1e-12));
  CHECK(state.step == 2);
}

TEST_CASE("adam rejects a non-finite gradient without mutating") {
  VectorXd p = VectorXd::Ones(3);
  VectorXd g = VectorXd::Zero(3);
  g(1) = std::numeric_limits<double>::quiet_NaN();
  auto state = nn::AdamState<double>::zeros(3);
  CHECK_THROWS_AS(nn::adam_step(state, p, g, {}), NumericError);
  CHECK(p == VectorXd::Ones(3));
  CHECK(state.step == 0);
}

TEST_CASE("checkpoint round trip") {
  const auto spec = MlpSpec::velocity_field(4, {8, 8}, Activation::SmoothRelu);
  const Mlp<double> mlp(spec);
  std::mt19937_64 rng(1);
  const nn::Checkpoint saved{spec, random_params(mlp, rng), 42, "unit"};
  const auto path = std::filesystem::temp_directory_path() / "tpflow-unit-checkpoint.bin";
  nn::save_checkpoint(path, saved);
  const auto loaded = nn::load_checkpoint(path);
  CHECK(loaded.spec == spec);
  CHECK(loaded.seed == 42);
  CHECK(loaded.label == "unit");
  CHECK(loaded.params == saved.params);
  std::filesystem::remove(path);
  CHECK_THROWS(nn::load_checkpoint(path));
}
