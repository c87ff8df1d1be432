// Copyright 2026 The nerfedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "nerfedit/core/eigen.hpp"
#include "nerfedit/core/error.hpp"

namespace nerfedit::fields {

struct ParamSpec {
  std::string name;
  int rows = 0;
  int cols = 0;
  size_t offset = 0;

  [[nodiscard]] size_t size() const { return static_cast<size_t>(rows) * cols; }
  bool operator==(const ParamSpec&) const = default;
};

/// Named matrices packed into one contiguous buffer. The flat layout is what
/// the optimizer and checkpoint code see; layers view it through Eigen maps.
template <typename T>
class ParameterSet {
 public:
  using MatrixMap = Eigen::Map<Mat<T>>;
  using ConstMatrixMap = Eigen::Map<const Mat<T>>;

  explicit ParameterSet(bool trainable = true) : trainable_(trainable) {}

  int add(std::string name, int rows, int cols) {
    specs_.push_back({std::move(name), rows, cols, values_.size()});
    values_.resize(values_.size() + static_cast<size_t>(rows) * cols, T(0));
    return static_cast<int>(specs_.size()) - 1;
  }

  MatrixMap matrix(int i) {
    const auto& s = specs_[i];
    return MatrixMap(values_.data() + s.offset, s.rows, s.cols);
  }
  ConstMatrixMap matrix(int i) const {
    const auto& s = specs_[i];
    return ConstMatrixMap(values_.data() + s.offset, s.rows, s.cols);
  }

  [[nodiscard]] std::span<T> flat() { return values_; }
  [[nodiscard]] std::span<const T> flat() const { return values_; }
  [[nodiscard]] const std::vector<ParamSpec>& specs() const { return specs_; }
  [[nodiscard]] size_t size() const { return values_.size(); }

  [[nodiscard]] bool trainable() const { return trainable_; }
  void set_trainable(bool t) { trainable_ = t; }

  [[nodiscard]] int find(const std::string& name) const {
    for (size_t i = 0; i < specs_.size(); ++i)
      if (specs_[i].name == name) return static_cast<int>(i);
    return -1;
  }

  /// Same layout, all zeros; used as a gradient accumulator.
  [[nodiscard]] ParameterSet zeros_like() const {
    ParameterSet z(true);
    z.specs_ = specs_;
    z.values_.assign(values_.size(), T(0));
    return z;
  }
  void set_zero() { std::fill(values_.begin(), values_.end(), T(0)); }

  [[nodiscard]] bool all_finite() const {
    for (T v : values_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  /// FNV-1a over the raw bytes; equal hashes mean byte-identical parameters
  /// for practical purposes.
  [[nodiscard]] uint64_t hash() const {
    uint64_t h = 1469598103934665603ull;
    const auto* bytes = reinterpret_cast<const unsigned char*>(values_.data());
    for (size_t i = 0; i < values_.size() * sizeof(T); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
    return h;
  }

  [[nodiscard]] double squared_norm(int i) const {
    return matrix(i).template cast<double>().squaredNorm();
  }

 private:
  bool trainable_;
  std::vector<ParamSpec> specs_;
  // A fixed base alignment keeps vectorized reductions independent of
  // where the heap places the buffer, so results are bit-reproducible.
  std::vector<T, Eigen::aligned_allocator<T>> values_;
};

}  // namespace nerfedit::fields
