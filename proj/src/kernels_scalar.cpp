// SPDX-License-Identifier: Apache-2.0
//
// Reference kernels. Every SIMD variant is equivalence-tested against these.
#include <algorithm>
#include <cmath>

#include "tllm/bitpack.hpp"
#include "tllm/kernels.hpp"

namespace tllm::kernels {
namespace {

void build_tables_scalar(const int8_t* act, int g, int t_tables, int n_tb, int32_t* tables) {
    for (int t = 0; t < t_tables; ++t) {
        int32_t* tb = tables + static_cast<size_t>(t) * n_tb;
        const int8_t* a = act + static_cast<size_t>(t) * g;
        // Base-3 expansion: after digit i the prefix table holds all 3^(i+1)
        // partial sums, digit 0 in the least-significant position.
        tb[0] = 0;
        int period = 1;
        for (int i = 0; i < g; ++i) {
            const int32_t av = a[i];
            for (int e = 0; e < period; ++e) {
                const int32_t lo = tb[e];
                tb[2 * period + e] = lo + av;
                tb[period + e] = lo;
                tb[e] = lo - av;
            }
            period *= 3;
        }
    }
    (void)n_tb;
}

void lookup_accumulate_scalar(const int32_t* tables, int n_tb, int t_tables, int b_idx,
                              const uint8_t* ivecs, size_t ivec_stride, int n_cols, int32_t* acc) {
    for (int c = 0; c < n_cols; ++c) {
        const uint8_t* iv = ivecs + static_cast<size_t>(c) * ivec_stride;
        int32_t sum = 0;
        size_t pos = 0;
        for (int t = 0; t < t_tables; ++t, pos += b_idx) {
            const uint32_t idx = read_bits(iv, pos, b_idx);
            sum += tables[static_cast<size_t>(t) * n_tb + idx];
        }
        acc[c] += sum;
    }
}

void quantize_i8_scalar(const float* x, int n, float scale, int8_t* out) {
    for (int i = 0; i < n; ++i) {
        const float v = x[i] / scale;
        // round half away from zero
        float r = std::trunc(v + std::copysign(0.5f, v));
        r = std::min(127.0f, std::max(-127.0f, r));
        out[i] = static_cast<int8_t>(r);
    }
}

float absmax_scalar(const float* x, int n) {
    float m = 0.0f;
    for (int i = 0; i < n; ++i) m = std::max(m, std::fabs(x[i]));
    return m;
}

float sum_squares_scalar(const float* x, int n) {
    float acc = 0.0f;
    for (int i = 0; i < n; ++i) acc += x[i] * x[i];
    return acc;
}

float dot_scalar(const float* a, const float* b, int n) {
    float acc = 0.0f;
    for (int i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

int32_t dot_i8i8_scalar(const int8_t* a, const int8_t* b, int n) {
    int32_t acc = 0;
    for (int i = 0; i < n; ++i) acc += static_cast<int32_t>(a[i]) * b[i];
    return acc;
}

void scale_scalar(const int32_t* in, int n, float s, float* out) {
    for (int i = 0; i < n; ++i) out[i] = static_cast<float>(in[i]) * s;
}

void add_scalar(const float* a, const float* b, int n, float* out) {
    for (int i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void rescale_add_scalar(float alpha, float* o, float beta, const float* v, int n) {
    for (int i = 0; i < n; ++i) {
        const float oa = alpha * o[i];
        const float vb = beta * v[i];
        o[i] = oa + vb;
    }
}

}  // namespace

extern const Kernels kScalarKernels;
const Kernels kScalarKernels = {
    "scalar",
    build_tables_scalar,
    lookup_accumulate_scalar,
    quantize_i8_scalar,
    absmax_scalar,
    sum_squares_scalar,
    dot_scalar,
    dot_i8i8_scalar,
    scale_scalar,
    add_scalar,
    rescale_add_scalar,
};

}  // namespace tllm::kernels
