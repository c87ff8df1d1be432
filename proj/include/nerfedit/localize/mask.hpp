// Copyright 2026 The nerfedit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "nerfedit/core/image.hpp"

namespace nerfedit::localize {

/// Single-channel binary map; any nonzero byte is "selected".
using Mask = Image<uint8_t>;

inline Mask make_mask(int w, int h, bool value = false) { return Mask(w, h, 1, value ? 1 : 0); }

inline size_t area(const Mask& m) {
  return static_cast<size_t>(std::count_if(m.data.begin(), m.data.end(), [](uint8_t v) { return v != 0; }));
}

inline Mask logical_not(const Mask& m) {
  Mask out = make_mask(m.width, m.height);
  for (size_t i = 0; i < m.data.size(); ++i) out.data[i] = m.data[i] ? 0 : 1;
  return out;
}

inline Mask binarize(const Mask& m) {
  Mask out = make_mask(m.width, m.height);
  for (size_t i = 0; i < m.data.size(); ++i) out.data[i] = m.data[i] ? 1 : 0;
  return out;
}

/// a subset of b, as pixel sets.
inline bool is_subset(const Mask& a, const Mask& b) {
  require(a.same_shape(b), "is_subset: shape mismatch");
  for (size_t i = 0; i < a.data.size(); ++i)
    if (a.data[i] && !b.data[i]) return false;
  return true;
}

inline bool disjoint(const Mask& a, const Mask& b) {
  require(a.same_shape(b), "disjoint: shape mismatch");
  for (size_t i = 0; i < a.data.size(); ++i)
    if (a.data[i] && b.data[i]) return false;
  return true;
}

/// n-fold binary dilation with a kernel x kernel block of ones (kernel odd).
/// Pixels outside the map count as unselected.
inline Mask dilate(const Mask& in, int n, int kernel = 5) {
  require(n >= 0, "dilate: count must be >= 0");
  require(kernel >= 1 && kernel % 2 == 1, "dilate: kernel size must be odd");
  Mask cur = binarize(in);
  const int r = kernel / 2;
  const int w = in.width, h = in.height;
  Mask tmp = make_mask(w, h);
  for (int it = 0; it < n; ++it) {
    // A box kernel is separable: max over rows, then over columns.
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        uint8_t v = 0;
        for (int dx = std::max(0, x - r); dx <= std::min(w - 1, x + r) && !v; ++dx) v = cur.at(dx, y);
        tmp.at(x, y) = v;
      }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        uint8_t v = 0;
        for (int dy = std::max(0, y - r); dy <= std::min(h - 1, y + r) && !v; ++dy) v = tmp.at(x, dy);
        cur.at(x, y) = v;
      }
  }
  return cur;
}

/// Nearest-neighbor resampling (pixel centers).
template <typename T>
Image<T> resize_nearest(const Image<T>& in, int w, int h) {
  Image<T> out(w, h, in.channels);
  for (int y = 0; y < h; ++y) {
    const int sy = std::min(in.height - 1, static_cast<int>((y + 0.5) * in.height / h));
    for (int x = 0; x < w; ++x) {
      const int sx = std::min(in.width - 1, static_cast<int>((x + 0.5) * in.width / w));
      for (int c = 0; c < in.channels; ++c) out.at(x, y, c) = in.at(sx, sy, c);
    }
  }
  return out;
}

}  // namespace nerfedit::localize
