// Copyright 2026 The nerfedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>

#include "nerfedit/core/eigen.hpp"
#include "nerfedit/core/random.hpp"
#include "nerfedit/fields/parameters.hpp"

namespace nerfedit::fields {

/// Affine layer y = W x + b addressing two entries of a ParameterSet.
struct Linear {
  int weight = -1;
  int bias = -1;
  int in = 0;
  int out = 0;

  template <typename T>
  static Linear create(ParameterSet<T>& p, const std::string& name, int in, int out) {
    Linear l;
    l.weight = p.add(name + ".weight", out, in);
    l.bias = p.add(name + ".bias", out, 1);
    l.in = in;
    l.out = out;
    return l;
  }

  /// Uniform(-1/sqrt(in), 1/sqrt(in)) for both weight and bias.
  template <typename T>
  void init_default(ParameterSet<T>& p, Rng& rng, double weight_scale = 1.0) const {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    auto w = p.matrix(weight);
    for (int i = 0; i < w.size(); ++i) w.data()[i] = static_cast<T>(weight_scale * uniform(rng, -bound, bound));
    auto b = p.matrix(bias);
    for (int i = 0; i < b.size(); ++i) b.data()[i] = static_cast<T>(uniform(rng, -bound, bound));
  }

  template <typename T>
  void set_bias(ParameterSet<T>& p, T value) const {
    p.matrix(bias).setConstant(value);
  }

  template <typename T, typename Derived>
  Mat<T> forward(const ParameterSet<T>& p, const Eigen::MatrixBase<Derived>& x) const {
    Mat<T> y(out, x.cols());
    y.noalias() = p.matrix(weight) * x;
    y.colwise() += p.matrix(bias).col(0);
    return y;
  }

  /// Accumulates dW, db into `grads` and returns dL/dx.
  template <typename T, typename DerivedX, typename DerivedG>
  Mat<T> backward(const ParameterSet<T>& p, ParameterSet<T>& grads, const Eigen::MatrixBase<DerivedX>& x,
                  const Eigen::MatrixBase<DerivedG>& dy, bool need_input_grad = true) const {
    grads.matrix(weight).noalias() += dy * x.transpose();
    grads.matrix(bias).col(0) += dy.rowwise().sum();
    if (!need_input_grad) return Mat<T>();
    Mat<T> dx(in, dy.cols());
    dx.noalias() = p.matrix(weight).transpose() * dy;
    return dx;
  }
};

template <typename T>
inline Mat<T> relu(const Mat<T>& z) {
  return z.cwiseMax(T(0));
}

template <typename T>
inline Mat<T> relu_backward(const Mat<T>& z, const Mat<T>& dy) {
  return (z.array() > T(0)).select(dy, T(0));
}

template <typename T>
inline Mat<T> logistic(const Mat<T>& z) {
  return (T(1) / (T(1) + (-z.array()).exp())).matrix();
}

}  // namespace nerfedit::fields
