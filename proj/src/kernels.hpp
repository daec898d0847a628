// Copyright 2026 The promptrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace promptrack::detail {

// Row-softmax of (phi phi^T) * scale for an n x d feature matrix (row-major),
// written to the n x n buffer `out`. Compiled with relaxed floating-point
// rules for vectorized exp; results are deterministic on a given build.
void softmax_self_attention(const float* phi, int n, int d, float scale,
                            float* out);

}  // namespace promptrack::detail
