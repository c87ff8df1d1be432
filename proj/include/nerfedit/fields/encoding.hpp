// Copyright 2026 The nerfedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "nerfedit/core/eigen.hpp"
#include "nerfedit/core/error.hpp"

namespace nerfedit::fields {

struct EncodingConfig {
  int num_freqs = 10;
  bool include_identity = true;

  [[nodiscard]] int output_dim(int input_dim) const {
    return input_dim * ((include_identity ? 1 : 0) + 2 * num_freqs);
  }
  void validate() const { require(num_freqs >= 0, "EncodingConfig: num_freqs must be >= 0"); }
  bool operator==(const EncodingConfig&) const = default;
};

/// Frequency encoding. Layout: [v (optional)] then, for each level l,
/// sin(2^l pi v) for every component followed by cos(2^l pi v).
template <typename T>
std::vector<T> positional_encode(std::span<const T> v, const EncodingConfig& cfg) {
  cfg.validate();
  for (T x : v) require(std::isfinite(static_cast<double>(x)), "positional_encode: non-finite input");
  const int n = static_cast<int>(v.size());
  std::vector<T> out;
  out.reserve(cfg.output_dim(n));
  if (cfg.include_identity) out.insert(out.end(), v.begin(), v.end());
  for (int l = 0; l < cfg.num_freqs; ++l) {
    const T freq = static_cast<T>(std::ldexp(std::numbers::pi, l));
    for (int i = 0; i < n; ++i) out.push_back(std::sin(freq * v[i]));
    for (int i = 0; i < n; ++i) out.push_back(std::cos(freq * v[i]));
  }
  return out;
}

/// Batched encoding of a 3xN block.
template <typename T>
Mat<T> encode_batch(const Mat3X<T>& v, const EncodingConfig& cfg) {
  Mat<T> out(cfg.output_dim(3), v.cols());
  int row = 0;
  if (cfg.include_identity) {
    out.topRows(3) = v;
    row = 3;
  }
  for (int l = 0; l < cfg.num_freqs; ++l) {
    const T freq = static_cast<T>(std::ldexp(std::numbers::pi, l));
    auto scaled = (v.array() * freq).eval();
    out.middleRows(row, 3) = scaled.sin().matrix();
    out.middleRows(row + 3, 3) = scaled.cos().matrix();
    row += 6;
  }
  return out;
}

/// Vector-Jacobian product of encode_batch with respect to its input.
template <typename T>
Mat3X<T> encode_batch_vjp(const Mat3X<T>& v, const Mat<T>& grad_out, const EncodingConfig& cfg) {
  Mat3X<T> g = Mat3X<T>::Zero(3, v.cols());
  int row = 0;
  if (cfg.include_identity) {
    g = grad_out.topRows(3);
    row = 3;
  }
  for (int l = 0; l < cfg.num_freqs; ++l) {
    const T freq = static_cast<T>(std::ldexp(std::numbers::pi, l));
    auto scaled = (v.array() * freq).eval();
    g.array() += freq * (grad_out.middleRows(row, 3).array() * scaled.cos() -
                         grad_out.middleRows(row + 3, 3).array() * scaled.sin());
    row += 6;
  }
  return g;
}

}  // namespace nerfedit::fields
