// SPDX-License-Identifier: Apache-2.0
//
// Fully connected velocity network with an explicit reverse-mode pass.
//
// Parameter layout: for every layer, the (out x in) weight matrix in
// column-major order followed by the bias vector. The output layer is linear;
// every hidden layer applies the configured activation.

#pragma once

#include "tpflow/types.hpp"

#include <cmath>
#include <cstddef>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace tpflow::nn {

enum class Activation { Tanh, SmoothRelu };

std::string to_string(Activation activation);
Activation activation_from_string(const std::string& name);

/// (tau, sin 2 pi tau, cos 2 pi tau)
inline constexpr int kTimeEmbeddingDim = 3;

struct MlpSpec {
  int input_dim = 0;
  std::vector<int> hidden_dims;
  int output_dim = kStateDim;
  Activation activation = Activation::Tanh;

  /// Spec for a conditional velocity field: input is state, time embedding and
  /// a one-hot condition over `num_conditions` ids.
  static MlpSpec velocity_field(int num_conditions, std::vector<int> hidden_dims,
                                Activation activation = Activation::Tanh) {
    return MlpSpec{kStateDim + kTimeEmbeddingDim + num_conditions, std::move(hidden_dims),
                   kStateDim, activation};
  }

  int num_conditions() const { return input_dim - kStateDim - kTimeEmbeddingDim; }

  std::vector<int> layer_sizes() const {
    std::vector<int> sizes{input_dim};
    sizes.insert(sizes.end(), hidden_dims.begin(), hidden_dims.end());
    sizes.push_back(output_dim);
    return sizes;
  }

  Eigen::Index param_count() const {
    const auto sizes = layer_sizes();
    Eigen::Index count = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      count += Eigen::Index{sizes[l + 1]} * sizes[l] + sizes[l + 1];
    }
    return count;
  }

  void validate() const {
    if (output_dim != kStateDim) {
      throw ConfigError("model.output_dim", "must equal the state dimension");
    }
    if (hidden_dims.empty()) throw ConfigError("model.hidden", "must be non-empty");
    for (int h : hidden_dims) {
      if (h <= 0) throw ConfigError("model.hidden", "layer widths must be positive");
    }
    if (num_conditions() < 1) {
      throw ConfigError("model.input_dim", "too small for state, time and condition inputs");
    }
  }

  bool operator==(const MlpSpec&) const = default;
};

/// Network input for v(x, tau, c).
template <class Scalar>
Vector<Scalar> velocity_input(const Point<Scalar>& x, Scalar tau, int condition,
                              int num_conditions) {
  if (condition < 0 || condition >= num_conditions) {
    throw ConfigError("condition " + std::to_string(condition) + " outside [0, " +
                      std::to_string(num_conditions) + ")");
  }
  Vector<Scalar> input = Vector<Scalar>::Zero(kStateDim + kTimeEmbeddingDim + num_conditions);
  const Scalar phase = Scalar(2) * std::numbers::pi_v<Scalar> * tau;
  input.template head<kStateDim>() = x;
  input(kStateDim) = tau;
  input(kStateDim + 1) = std::sin(phase);
  input(kStateDim + 2) = std::cos(phase);
  input(kStateDim + kTimeEmbeddingDim + condition) = Scalar(1);
  return input;
}

/// Network input columns for a batch of (x, tau, c) triples.
template <class Scalar>
Matrix<Scalar> velocity_inputs(const std::vector<Point<Scalar>>& xs, const std::vector<Scalar>& taus,
                               const std::vector<int>& conditions, int num_conditions) {
  Matrix<Scalar> inputs(kStateDim + kTimeEmbeddingDim + num_conditions, Eigen::Index(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    inputs.col(Eigen::Index(i)) = velocity_input(xs[i], taus[i], conditions[i], num_conditions);
  }
  return inputs;
}

/// Multilayer perceptron over column batches: every input column is one sample.
template <class Scalar>
class Mlp {
 public:
  using Vec = Vector<Scalar>;
  using Mat = Matrix<Scalar>;

  /// Per-layer intermediates of one forward pass, consumed by backward().
  struct Cache {
    std::vector<Mat> inputs;         // input to layer l
    std::vector<Mat> preactivation;  // W x + b of layer l
  };

  explicit Mlp(MlpSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    sizes_ = spec_.layer_sizes();
    Eigen::Index offset = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      offsets_.push_back(offset);
      offset += Eigen::Index{sizes_[l + 1]} * sizes_[l] + sizes_[l + 1];
    }
    param_count_ = offset;
  }

  const MlpSpec& spec() const { return spec_; }
  Eigen::Index param_count() const { return param_count_; }
  std::size_t layer_count() const { return offsets_.size(); }

  /// Hidden weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases and the whole
  /// output layer are zero, so a fresh model has zero output.
  template <class Rng>
  Vec init_params(Rng& rng) const {
    Vec params = Vec::Zero(param_count_);
    for (std::size_t l = 0; l + 1 < layer_count(); ++l) {
      const Scalar bound = Scalar(1) / std::sqrt(Scalar(sizes_[l]));
      std::uniform_real_distribution<Scalar> dist(-bound, bound);
      auto w = weights(params, l);
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = dist(rng);
      }
    }
    return params;
  }

  Mat forward(const Vec& params, const Mat& inputs) const {
    check_shapes(params, inputs);
    Mat h = inputs;
    for (std::size_t l = 0; l < layer_count(); ++l) {
      Mat z = affine(params, l, h);
      h = (l + 1 < layer_count()) ? activate(z) : std::move(z);
    }
    return h;
  }

  Mat forward(const Vec& params, const Mat& inputs, Cache& cache) const {
    check_shapes(params, inputs);
    cache.inputs.clear();
    cache.preactivation.clear();
    Mat h = inputs;
    for (std::size_t l = 0; l < layer_count(); ++l) {
      Mat z = affine(params, l, h);
      cache.inputs.push_back(std::move(h));
      h = (l + 1 < layer_count()) ? activate(z) : z;
      cache.preactivation.push_back(std::move(z));
    }
    return h;
  }

  /// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(outputs).
  void backward(const Vec& params, const Cache& cache, const Mat& d_outputs, Vec& grad) const {
    if (grad.size() != param_count_) grad = Vec::Zero(param_count_);
    Mat delta = d_outputs;
    for (std::size_t l = layer_count(); l-- > 0;) {
      if (l + 1 < layer_count()) {
        delta = delta.cwiseProduct(activate_derivative(cache.preactivation[l]));
      }
      weights(grad, l).noalias() += delta * cache.inputs[l].transpose();
      bias(grad, l) += delta.rowwise().sum();
      if (l > 0) delta = weights(params, l).transpose() * delta;
    }
  }

  Point<Scalar> velocity(const Vec& params, const Point<Scalar>& x, Scalar tau,
                         int condition) const {
    return forward(params, Mat(velocity_input(x, tau, condition, spec_.num_conditions())));
  }

  Eigen::Map<const Mat> weights(const Vec& params, std::size_t l) const {
    return {params.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
  }
  Eigen::Map<Mat> weights(Vec& params, std::size_t l) const {
    return {params.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
  }
  Eigen::Map<const Vec> bias(const Vec& params, std::size_t l) const {
    return {params.data() + offsets_[l] + Eigen::Index{sizes_[l + 1]} * sizes_[l], sizes_[l + 1]};
  }
  Eigen::Map<Vec> bias(Vec& params, std::size_t l) const {
    return {params.data() + offsets_[l] + Eigen::Index{sizes_[l + 1]} * sizes_[l], sizes_[l + 1]};
  }

 private:
  Mat affine(const Vec& params, std::size_t l, const Mat& h) const {
    Mat z = weights(params, l) * h;
    z.colwise() += bias(params, l);
    return z;
  }

  void check_shapes(const Vec& params, const Mat& inputs) const {
    if (params.size() != param_count_) {
      throw ConfigError("parameter vector has " + std::to_string(params.size()) +
                        " entries, spec implies " + std::to_string(param_count_));
    }
    if (inputs.rows() != spec_.input_dim) {
      throw ConfigError("input has " + std::to_string(inputs.rows()) + " rows, spec expects " +
                        std::to_string(spec_.input_dim));
    }
  }

  Mat activate(const Mat& z) const {
    if (spec_.activation == Activation::Tanh) return z.array().tanh().matrix();
    return z.unaryExpr([](Scalar v) {
      return v > Scalar(0) ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
    });
  }

  Mat activate_derivative(const Mat& z) const {
    if (spec_.activation == Activation::Tanh) {
      return (Scalar(1) - z.array().tanh().square()).matrix();
    }
    return z.unaryExpr([](Scalar v) { return Scalar(1) / (Scalar(1) + std::exp(-v)); });
  }

  MlpSpec spec_;
  std::vector<int> sizes_;
  std::vector<Eigen::Index> offsets_;
  Eigen::Index param_count_ = 0;
};

inline std::string to_string(Activation activation) {
  return activation == Activation::Tanh ? "tanh" : "smooth-relu";
}

inline Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "smooth-relu") return Activation::SmoothRelu;
  throw ConfigError("model.activation", "unknown activation '" + name + "'");
}

}  // namespace tpflow::nn
