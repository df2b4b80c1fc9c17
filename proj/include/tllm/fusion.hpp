// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "tllm/core.hpp"

namespace tllm {

/// Precomputed RoPE sinusoids: cos/sin(m * theta_t) for every position m and
/// pair index t < d_head/2, with theta_t = 10000^(-2t/d_head).
struct RopeCache {
    int max_seq = 0;
    int d_head = 0;
    std::vector<float> cos_v;  // [max_seq][d_head/2]
    std::vector<float> sin_v;

    static RopeCache build(int max_seq, int d_head);

    float cos_at(int pos, int t) const { return cos_v[static_cast<size_t>(pos) * (d_head / 2) + t]; }
    float sin_at(int pos, int t) const { return sin_v[static_cast<size_t>(pos) * (d_head / 2) + t]; }
};

/// Half-split pairing: rotates (x[t], x[t + d/2]) and writes the pair to
/// slots (2t, 2t+1). The canonical layout GPUs use; kept as the equivalence
/// oracle for the consecutive variant.
FloatVector rope_interleaved(std::span<const float> x, int pos, const RopeCache& cache);

/// Adjacent pairing: rotates (x[2t], x[2t+1]) in place of slots (2t, 2t+1).
/// This is the hot-path variant; weights are pre-permuted so it matches the
/// interleaved form exactly.
FloatVector rope_consecutive(std::span<const float> x, int pos, const RopeCache& cache);
void rope_consecutive_inplace(float* x, int d_head, int pos, const RopeCache& cache);

/// Column permutation map for one head, new column -> old column:
/// new[2t] = old[t], new[2t+1] = old[d_head/2 + t].
std::vector<int> qk_column_permutation(int d_head);

/// Applies the per-head column exchange to a q/k projection weight so that
/// consecutive-pair RoPE on x*W_perm equals interleaved RoPE on x*W.
TernaryMatrix permute_qk_head_columns(const TernaryMatrix& w, int n_heads, int d_head);

/// Inverse of permute_qk_head_columns.
TernaryMatrix unpermute_qk_head_columns(const TernaryMatrix& w, int n_heads, int d_head);

/// out[i] = silu(gate[i]) * up[i], silu(z) = z / (1 + exp(-z))
FloatVector swiglu(std::span<const float> gate, std::span<const float> up);

FloatVector residual_add(std::span<const float> a, std::span<const float> b);

}  // namespace tllm
