// Copyright 2026 The nerfedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>

#include "nerfedit/core/error.hpp"

namespace nerfedit::objectives {

/// Linear ramp from `start` to `target` over `steps`, constant afterwards.
struct AnnealSchedule {
  double start = 0;
  double target = 0;
  int steps = 0;

  static AnnealSchedule constant(double v) { return {v, v, 0}; }
};

inline double anneal(const AnnealSchedule& s, int step) {
  if (s.steps <= 0 || step >= s.steps) return s.target;
  if (step <= 0) return s.start;
  const double f = static_cast<double>(step) / s.steps;
  return s.start + f * (s.target - s.start);
}

/// 5e-4 decayed linearly to 1e-4 over the first 1000 steps, then held.
struct LearningRateSchedule {
  double initial = 5e-4;
  double final = 1e-4;
  int decay_steps = 1000;

  [[nodiscard]] double at(int step) const { return anneal({initial, final, decay_steps}, step); }
};

}  // namespace nerfedit::objectives
