// Copyright 2026 The promptrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "kernels.hpp"

#include <cmath>
#include <cstddef>
#include <vector>

namespace promptrack::detail {

void softmax_self_attention(const float* phi, int n, int d, float scale,
                            float* out) {
  // Column-major copy so the inner loops run over positions.
  std::vector<float> cols(static_cast<std::size_t>(n) * d);
  for (int r = 0; r < n; ++r) {
    for (int k = 0; k < d; ++k) {
      cols[static_cast<std::size_t>(k) * n + r] = phi[static_cast<std::size_t>(r) * d + k] * scale;
    }
  }
  for (int r = 0; r < n; ++r) {
    float* row = out + static_cast<std::size_t>(r) * n;
    const float* a = phi + static_cast<std::size_t>(r) * d;
    for (int c = 0; c < n; ++c) row[c] = 0.0f;
    for (int k = 0; k < d; ++k) {
      const float ak = a[k];
      const float* col = cols.data() + static_cast<std::size_t>(k) * n;
      for (int c = 0; c < n; ++c) row[c] += ak * col[c];
    }
    float peak = row[0];
    for (int c = 1; c < n; ++c) peak = row[c] > peak ? row[c] : peak;
    float total = 0.0f;
    for (int c = 0; c < n; ++c) {
      row[c] = std::exp(row[c] - peak);
      total += row[c];
    }
    const float inv = 1.0f / total;
    for (int c = 0; c < n; ++c) row[c] *= inv;
  }
}

}  // namespace promptrack::detail
