// Copyright 2026 The nerfedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

namespace nerfedit {

// Batched quantities are stored column-per-sample.
template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Row = Eigen::Matrix<T, 1, Eigen::Dynamic>;
template <typename T>
using Mat3X = Eigen::Matrix<T, 3, Eigen::Dynamic>;
template <typename T>
using Vec3 = Eigen::Matrix<T, 3, 1>;
template <typename T>
using VecX = Eigen::Matrix<T, Eigen::Dynamic, 1>;

}  // namespace nerfedit
