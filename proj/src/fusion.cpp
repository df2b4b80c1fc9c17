// SPDX-License-Identifier: Apache-2.0
#include "tllm/fusion.hpp"

#include <cmath>

#include "tllm/kernels.hpp"

namespace tllm {

RopeCache RopeCache::build(int max_seq, int d_head) {
    if (max_seq < 1 || d_head < 2 || d_head % 2 != 0) {
        throw ShapeError("RopeCache: max_seq >= 1 and even d_head >= 2 required");
    }
    RopeCache c;
    c.max_seq = max_seq;
    c.d_head = d_head;
    const int half = d_head / 2;
    c.cos_v.resize(static_cast<size_t>(max_seq) * half);
    c.sin_v.resize(static_cast<size_t>(max_seq) * half);
    for (int t = 0; t < half; ++t) {
        const double theta = std::pow(10000.0, -2.0 * t / d_head);
        for (int m = 0; m < max_seq; ++m) {
            const double angle = m * theta;
            c.cos_v[static_cast<size_t>(m) * half + t] = static_cast<float>(std::cos(angle));
            c.sin_v[static_cast<size_t>(m) * half + t] = static_cast<float>(std::sin(angle));
        }
    }
    return c;
}

namespace {
void check_rope_args(size_t n, int pos, const RopeCache& cache) {
    if (static_cast<int>(n) != cache.d_head) {
        throw ShapeError("rope: input length != cached d_head");
    }
    if (pos < 0 || pos >= cache.max_seq) {
        throw CapacityError("rope: position outside precomputed cache");
    }
}
}  // namespace

FloatVector rope_interleaved(std::span<const float> x, int pos, const RopeCache& cache) {
    check_rope_args(x.size(), pos, cache);
    const int half = cache.d_head / 2;
    FloatVector out(x.size());
    for (int t = 0; t < half; ++t) {
        const float c = cache.cos_at(pos, t);
        const float s = cache.sin_at(pos, t);
        const float lo = x[t];
        const float hi = x[t + half];
        out[2 * t] = lo * c - hi * s;
        out[2 * t + 1] = hi * c + lo * s;
    }
    return out;
}

void rope_consecutive_inplace(float* x, int d_head, int pos, const RopeCache& cache) {
    check_rope_args(static_cast<size_t>(d_head), pos, cache);
    const int half = d_head / 2;
    for (int t = 0; t < half; ++t) {
        const float c = cache.cos_at(pos, t);
        const float s = cache.sin_at(pos, t);
        const float even = x[2 * t];
        const float odd = x[2 * t + 1];
        x[2 * t] = even * c - odd * s;
        x[2 * t + 1] = odd * c + even * s;
    }
}

FloatVector rope_consecutive(std::span<const float> x, int pos, const RopeCache& cache) {
    FloatVector out(x.begin(), x.end());
    rope_consecutive_inplace(out.data(), static_cast<int>(out.size()), pos, cache);
    return out;
}

std::vector<int> qk_column_permutation(int d_head) {
    const int half = d_head / 2;
    std::vector<int> perm(d_head);
    for (int t = 0; t < half; ++t) {
        perm[2 * t] = t;
        perm[2 * t + 1] = half + t;
    }
    return perm;
}

namespace {
TernaryMatrix apply_head_column_map(const TernaryMatrix& w, int n_heads, int d_head,
                                    const std::vector<int>& new_to_old) {
    if (d_head < 2 || d_head % 2 != 0 || n_heads < 1) {
        throw ShapeError("permute_qk_head_columns: even d_head >= 2 and n_heads >= 1 required");
    }
    if (w.cols != n_heads * d_head) {
        throw ShapeError("permute_qk_head_columns: cols != n_heads * d_head");
    }
    TernaryMatrix out(w.rows, w.cols);
    for (int r = 0; r < w.rows; ++r) {
        for (int h = 0; h < n_heads; ++h) {
            const int base = h * d_head;
            for (int c = 0; c < d_head; ++c) {
                out.at(r, base + c) = w.at(r, base + new_to_old[c]);
            }
        }
    }
    return out;
}
}  // namespace

TernaryMatrix permute_qk_head_columns(const TernaryMatrix& w, int n_heads, int d_head) {
    return apply_head_column_map(w, n_heads, d_head, qk_column_permutation(d_head));
}

TernaryMatrix unpermute_qk_head_columns(const TernaryMatrix& w, int n_heads, int d_head) {
    const std::vector<int> perm = qk_column_permutation(d_head);
    std::vector<int> inv(perm.size());
    for (size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = static_cast<int>(i);
    return apply_head_column_map(w, n_heads, d_head, inv);
}

FloatVector swiglu(std::span<const float> gate, std::span<const float> up) {
    if (gate.size() != up.size()) {
        throw ShapeError("swiglu: gate and up lengths differ");
    }
    FloatVector out(gate.size());
    for (size_t i = 0; i < gate.size(); ++i) {
        const float z = gate[i];
        out[i] = z / (1.0f + std::exp(-z)) * up[i];
    }
    return out;
}

FloatVector residual_add(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) {
        throw ShapeError("residual_add: lengths differ");
    }
    FloatVector out(a.size());
    kernels::active().add_f32(a.data(), b.data(), static_cast<int>(a.size()), out.data());
    return out;
}

}  // namespace tllm
