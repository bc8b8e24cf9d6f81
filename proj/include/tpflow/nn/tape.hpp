// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tpflow/nn/mlp.hpp"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace tpflow::nn {

/// Records forward evaluations of one network so a scalar loss built from
/// their outputs can be differentiated with respect to the parameters.
///
/// A loss closure calls forward() for every evaluation it needs, computes its
/// value, and seeds each evaluation with d(loss)/d(output). gradient() then runs
/// the reverse pass over every recorded evaluation.
template <class Scalar>
class Tape {
 public:
  using Vec = Vector<Scalar>;
  using Mat = Matrix<Scalar>;

  struct Recorded {
    std::size_t id;
    Mat output;  // one column per input column
  };

  Tape(const Mlp<Scalar>& mlp, const Vec& params) : mlp_(&mlp), params_(&params) {}

  Recorded forward(const Mat& inputs) {
    Entry& entry = entries_.emplace_back();
    Mat out = mlp_->forward(*params_, inputs, entry.cache);
    entry.seed = Mat::Zero(out.rows(), out.cols());
    return {entries_.size() - 1, std::move(out)};
  }

  Recorded velocity(const Point<Scalar>& x, Scalar tau, int condition) {
    return forward(Mat(velocity_input(x, tau, condition, mlp_->spec().num_conditions())));
  }

  /// Adds d(loss)/d(output) for a recorded evaluation.
  void seed(std::size_t id, const Mat& d_output) { entries_.at(id).seed += d_output; }

  std::size_t size() const { return entries_.size(); }

  Vec gradient() const {
    Vec grad = Vec::Zero(mlp_->param_count());
    for (const Entry& entry : entries_) {
      if (entry.seed.isZero(0)) continue;
      mlp_->backward(*params_, entry.cache, entry.seed, grad);
    }
    return grad;
  }

 private:
  struct Entry {
    typename Mlp<Scalar>::Cache cache;
    Mat seed;
  };

  const Mlp<Scalar>* mlp_;
  const Vec* params_;
  std::vector<Entry> entries_;
};

/// Throws NumericError naming the first non-finite entry.
template <class Scalar>
void require_finite(const Vector<Scalar>& values, const std::string& what) {
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values(i))) {
      throw NumericError(what + " entry " + std::to_string(i) + " is non-finite");
    }
  }
}

/// Loss value and its exact gradient for a closure `Scalar(Tape<Scalar>&)`.
template <class Scalar, class LossClosure>
std::pair<Scalar, Vector<Scalar>> value_and_gradient(const Mlp<Scalar>& mlp,
                                                     const Vector<Scalar>& params,
                                                     LossClosure&& loss) {
  Tape<Scalar> tape(mlp, params);
  const Scalar value = loss(tape);
  if (!std::isfinite(value)) {
    throw NumericError("loss is non-finite (" + std::to_string(value) + ")");
  }
  Vector<Scalar> grad = tape.gradient();
  require_finite(grad, "gradient");
  return {value, std::move(grad)};
}

}  // namespace tpflow::nn
