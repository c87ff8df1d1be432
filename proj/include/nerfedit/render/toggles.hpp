// Copyright 2026 The nerfedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "nerfedit/core/error.hpp"
#include "nerfedit/fields/radiance_field.hpp"

namespace nerfedit::render {

/// Subset of {add density, remove density, change color} an edit may use.
struct EditOps {
  bool add = true;
  bool remove = true;
  bool change = true;

  [[nodiscard]] bool any() const { return add || remove || change; }
  [[nodiscard]] bool all() const { return add && remove && change; }
  bool operator==(const EditOps&) const = default;

  static EditOps none() { return {false, false, false}; }
  static EditOps parse(const std::vector<std::string>& names) {
    EditOps ops = none();
    for (const auto& n : names) {
      if (n == "add") ops.add = true;
      else if (n == "remove") ops.remove = true;
      else if (n == "change") ops.change = true;
      else throw ValidationError("unknown editing operation '" + n + "' (expected add, remove, change)");
    }
    return ops;
  }
  [[nodiscard]] std::vector<std::string> names() const {
    std::vector<std::string> v;
    if (add) v.emplace_back("add");
    if (remove) v.emplace_back("remove");
    if (change) v.emplace_back("change");
    return v;
  }
};

/// Disabled operations force their head to zero: add -> sigma_e,
/// remove -> beta_sigma, change -> beta_c.
template <typename T>
fields::EditableBatch<T> apply_operation_toggles(fields::EditableBatch<T> e, const EditOps& ops) {
  if (!ops.add) e.density.setZero();
  if (!ops.remove) e.density_blend.setZero();
  if (!ops.change) e.color_blend.setZero();
  return e;
}

template <typename T>
fields::EditableOutput<T> apply_operation_toggles(fields::EditableOutput<T> e, const EditOps& ops) {
  if (!ops.add) e.density = T(0);
  if (!ops.remove) e.density_blend = T(0);
  if (!ops.change) e.color_blend = T(0);
  return e;
}

/// Chain rule through the toggles: forced heads pass no gradient.
template <typename T>
void apply_operation_toggles_grad(fields::EditableGrad<T>& g, const EditOps& ops) {
  if (!ops.add) g.density.setZero();
  if (!ops.remove) g.density_blend.setZero();
  if (!ops.change) g.color_blend.setZero();
}

}  // namespace nerfedit::render
