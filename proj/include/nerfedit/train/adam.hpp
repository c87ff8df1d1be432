// Copyright 2026 The nerfedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "nerfedit/core/error.hpp"
#include "nerfedit/fields/parameters.hpp"

namespace nerfedit::train {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const {
    require(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1, "Adam: betas must lie in [0,1)");
    require(eps > 0, "Adam: eps must be > 0");
  }
};

/// Bias-corrected Adam over a flat parameter set.
template <typename T>
class Adam {
 public:
  Adam() = default;
  Adam(const AdamConfig& cfg, size_t n) : cfg_(cfg), m_(n, T(0)), v_(n, T(0)) { cfg.validate(); }

  void step(fields::ParameterSet<T>& params, const fields::ParameterSet<T>& grads, double lr) {
    if (!params.trainable()) throw ValidationError("Adam: refusing to update a frozen parameter set");
    require(params.size() == m_.size() && grads.size() == m_.size(), "Adam: size mismatch");
    ++t_;
    const double b1 = cfg_.beta1, b2 = cfg_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    auto p = params.flat();
    auto g = grads.flat();
    for (size_t i = 0; i < m_.size(); ++i) {
      m_[i] = static_cast<T>(b1 * m_[i] + (1 - b1) * g[i]);
      v_[i] = static_cast<T>(b2 * v_[i] + (1 - b2) * double(g[i]) * g[i]);
      const double mh = m_[i] / c1, vh = v_[i] / c2;
      p[i] = static_cast<T>(p[i] - lr * mh / (std::sqrt(vh) + cfg_.eps));
    }
  }

  [[nodiscard]] int64_t steps() const { return t_; }
  [[nodiscard]] const std::vector<T>& first_moment() const { return m_; }
  [[nodiscard]] const std::vector<T>& second_moment() const { return v_; }
  [[nodiscard]] const AdamConfig& config() const { return cfg_; }

  void restore(int64_t t, std::vector<T> m, std::vector<T> v) {
    require(m.size() == m_.size() && v.size() == v_.size(), "Adam: restored moments have the wrong size");
    t_ = t;
    m_ = std::move(m);
    v_ = std::move(v);
  }

 private:
  AdamConfig cfg_{};
  int64_t t_ = 0;
  std::vector<T> m_, v_;
};

}  // namespace nerfedit::train
