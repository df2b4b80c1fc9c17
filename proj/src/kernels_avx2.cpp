// SPDX-License-Identifier: Apache-2.0
//
// AVX2 kernel variants. Compiled with -mavx2 and selected at runtime only
// when the CPU reports AVX2, so nothing here may be called elsewhere.
//
// Integer and elementwise-float kernels are bit-exact ports of the scalar
// reference (same per-element IEEE operations, no FMA). Reductions keep a
// lane-parallel accumulator and differ from scalar only by summation order.
#include <algorithm>
#include <cmath>
#include <cstring>

#include "tllm/bitpack.hpp"
#include "tllm/kernels.hpp"

#if defined(__x86_64__) || defined(__i386__)
#include <immintrin.h>

namespace tllm::kernels {
namespace {

void build_tables_avx2(const int8_t* act, int g, int t_tables, int n_tb, int32_t* tables) {
    for (int t = 0; t < t_tables; ++t) {
        int32_t* tb = tables + static_cast<size_t>(t) * n_tb;
        const int8_t* a = act + static_cast<size_t>(t) * g;
        tb[0] = 0;
        int period = 1;
        for (int i = 0; i < g; ++i) {
            const int32_t av = a[i];
            const __m256i av8 = _mm256_set1_epi32(av);
            int e = 0;
            for (; e + 8 <= period; e += 8) {
                const __m256i lo = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(tb + e));
                _mm256_storeu_si256(reinterpret_cast<__m256i*>(tb + 2 * period + e), _mm256_add_epi32(lo, av8));
                _mm256_storeu_si256(reinterpret_cast<__m256i*>(tb + period + e), lo);
                _mm256_storeu_si256(reinterpret_cast<__m256i*>(tb + e), _mm256_sub_epi32(lo, av8));
            }
            for (; e < period; ++e) {
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

void lookup_accumulate_avx2(const int32_t* tables, int n_tb, int t_tables, int b_idx,
                            const uint8_t* ivecs, size_t ivec_stride, int n_cols, int32_t* acc) {
    constexpr int kMaxTables = 256;
    int c = 0;
    if (t_tables <= kMaxTables && b_idx <= 8) {
        alignas(16) uint8_t idx8[kMaxTables * 8];
        for (; c + 8 <= n_cols; c += 8) {
            for (int lane = 0; lane < 8; ++lane) {
                const uint8_t* iv = ivecs + static_cast<size_t>(c + lane) * ivec_stride;
                size_t pos = 0;
                for (int t = 0; t < t_tables; ++t, pos += b_idx) {
                    idx8[t * 8 + lane] = static_cast<uint8_t>(read_bits(iv, pos, b_idx));
                }
            }
            __m256i accv = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(acc + c));
            for (int t = 0; t < t_tables; ++t) {
                const __m128i lanes = _mm_loadl_epi64(reinterpret_cast<const __m128i*>(idx8 + t * 8));
                const __m256i vidx = _mm256_cvtepu8_epi32(lanes);
                const __m256i vals =
                    _mm256_i32gather_epi32(tables + static_cast<size_t>(t) * n_tb, vidx, 4);
                accv = _mm256_add_epi32(accv, vals);
            }
            _mm256_storeu_si256(reinterpret_cast<__m256i*>(acc + c), accv);
        }
    }
    for (; c < n_cols; ++c) {
        const uint8_t* iv = ivecs + static_cast<size_t>(c) * ivec_stride;
        int32_t sum = 0;
        size_t pos = 0;
        for (int t = 0; t < t_tables; ++t, pos += b_idx) {
            sum += tables[static_cast<size_t>(t) * n_tb + read_bits(iv, pos, b_idx)];
        }
        acc[c] += sum;
    }
}

void quantize_i8_avx2(const float* x, int n, float scale, int8_t* out) {
    const __m256 vscale = _mm256_set1_ps(scale);
    const __m256 vhalf = _mm256_set1_ps(0.5f);
    const __m256 vsign = _mm256_set1_ps(-0.0f);
    const __m256 vmax = _mm256_set1_ps(127.0f);
    const __m256 vmin = _mm256_set1_ps(-127.0f);
    int i = 0;
    alignas(32) int32_t tmp[8];
    for (; i + 8 <= n; i += 8) {
        const __m256 v = _mm256_div_ps(_mm256_loadu_ps(x + i), vscale);
        const __m256 half = _mm256_or_ps(_mm256_and_ps(v, vsign), vhalf);  // copysign(0.5, v)
        __m256 r = _mm256_round_ps(_mm256_add_ps(v, half), _MM_FROUND_TO_ZERO | _MM_FROUND_NO_EXC);
        r = _mm256_min_ps(vmax, _mm256_max_ps(vmin, r));
        _mm256_store_si256(reinterpret_cast<__m256i*>(tmp), _mm256_cvtps_epi32(r));
        for (int l = 0; l < 8; ++l) out[i + l] = static_cast<int8_t>(tmp[l]);
    }
    for (; i < n; ++i) {
        const float v = x[i] / scale;
        float r = std::trunc(v + std::copysign(0.5f, v));
        r = std::min(127.0f, std::max(-127.0f, r));
        out[i] = static_cast<int8_t>(r);
    }
}

float absmax_avx2(const float* x, int n) {
    const __m256 abs_mask = _mm256_castsi256_ps(_mm256_set1_epi32(0x7fffffff));
    __m256 vm = _mm256_setzero_ps();
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        vm = _mm256_max_ps(vm, _mm256_and_ps(_mm256_loadu_ps(x + i), abs_mask));
    }
    alignas(32) float lanes[8];
    _mm256_store_ps(lanes, vm);
    float m = 0.0f;
    for (float l : lanes) m = std::max(m, l);
    for (; i < n; ++i) m = std::max(m, std::fabs(x[i]));
    return m;
}

float hsum(__m256 v) {
    const __m128 lo = _mm256_castps256_ps128(v);
    const __m128 hi = _mm256_extractf128_ps(v, 1);
    __m128 s = _mm_add_ps(lo, hi);
    s = _mm_add_ps(s, _mm_movehl_ps(s, s));
    s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 1));
    return _mm_cvtss_f32(s);
}

float sum_squares_avx2(const float* x, int n) {
    __m256 acc = _mm256_setzero_ps();
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 v = _mm256_loadu_ps(x + i);
        acc = _mm256_add_ps(acc, _mm256_mul_ps(v, v));
    }
    float s = hsum(acc);
    for (; i < n; ++i) s += x[i] * x[i];
    return s;
}

float dot_avx2(const float* a, const float* b, int n) {
    __m256 acc = _mm256_setzero_ps();
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        acc = _mm256_add_ps(acc, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    }
    float s = hsum(acc);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

int32_t dot_i8i8_avx2(const int8_t* a, const int8_t* b, int n) {
    __m256i acc = _mm256_setzero_si256();
    const __m256i ones = _mm256_set1_epi16(1);
    int i = 0;
    for (; i + 32 <= n; i += 32) {
        const __m256i va = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + i));
        const __m256i vb = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b + i));
        // u8*s8 trick: |a| * (b with a's sign); pair sums stay < 2^15
        const __m256i prod16 = _mm256_maddubs_epi16(_mm256_abs_epi8(va), _mm256_sign_epi8(vb, va));
        acc = _mm256_add_epi32(acc, _mm256_madd_epi16(prod16, ones));
    }
    alignas(32) int32_t lanes[8];
    _mm256_store_si256(reinterpret_cast<__m256i*>(lanes), acc);
    int32_t s = 0;
    for (int32_t l : lanes) s += l;
    for (; i < n; ++i) s += static_cast<int32_t>(a[i]) * b[i];
    return s;
}

void scale_avx2(const int32_t* in, int n, float s, float* out) {
    const __m256 vs = _mm256_set1_ps(s);
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 v = _mm256_cvtepi32_ps(_mm256_loadu_si256(reinterpret_cast<const __m256i*>(in + i)));
        _mm256_storeu_ps(out + i, _mm256_mul_ps(v, vs));
    }
    for (; i < n; ++i) out[i] = static_cast<float>(in[i]) * s;
}

void add_avx2(const float* a, const float* b, int n, float* out) {
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void rescale_add_avx2(float alpha, float* o, float beta, const float* v, int n) {
    const __m256 va = _mm256_set1_ps(alpha);
    const __m256 vb = _mm256_set1_ps(beta);
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 oa = _mm256_mul_ps(va, _mm256_loadu_ps(o + i));
        const __m256 vv = _mm256_mul_ps(vb, _mm256_loadu_ps(v + i));
        _mm256_storeu_ps(o + i, _mm256_add_ps(oa, vv));
    }
    for (; i < n; ++i) {
        const float oa = alpha * o[i];
        const float vv = beta * v[i];
        o[i] = oa + vv;
    }
}

}  // namespace

extern const Kernels kAvx2Kernels;
const Kernels kAvx2Kernels = {
    "avx2",
    build_tables_avx2,
    lookup_accumulate_avx2,
    quantize_i8_avx2,
    absmax_avx2,
    sum_squares_avx2,
    dot_avx2,
    dot_i8i8_avx2,
    scale_avx2,
    add_avx2,
    rescale_add_avx2,
};

}  // namespace tllm::kernels

#endif  // x86
