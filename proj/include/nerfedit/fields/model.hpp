// Copyright 2026 The nerfedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>

#include "nerfedit/fields/radiance_field.hpp"

namespace nerfedit::fields {

/// Frozen scene: a coarse network and, when trained separately, a fine one.
/// Without a fine network the coarse one serves both passes.
template <typename T>
struct PretrainedModel {
  PretrainedField<T> coarse;
  std::optional<PretrainedField<T>> fine;

  [[nodiscard]] const PretrainedField<T>& fine_network() const { return fine ? *fine : coarse; }

  [[nodiscard]] uint64_t hash() const {
    uint64_t h = coarse.params().hash();
    if (fine) h ^= fine->params().hash() * 1099511628211ull;
    return h;
  }

  void set_trainable(bool t) {
    coarse.mutable_params().set_trainable(t);
    if (fine) fine->mutable_params().set_trainable(t);
  }
};

}  // namespace nerfedit::fields
