// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace tllm::kernels {

enum class Isa { scalar, avx2 };

// Inner-loop kernel table. The scalar entries are the reference
// implementations; SIMD variants must match them bit-exactly on integer and
// elementwise-float kernels. Float reductions (sum_squares, dot) may differ
// by summation order and are held to a relative tolerance instead.
struct Kernels {
    const char* name;

    // Build t_tables lookup tables of n_tb int32 entries each (contiguous,
    // stride n_tb) from t_tables*g int8 activations. Entry e of table t is
    // the dot product of activation group t with the trit group whose base-3
    // encoding is e (digit 0 least significant, trit = digit - 1).
    void (*build_tables)(const int8_t* act, int g, int t_tables, int n_tb, int32_t* tables);

    // For each of n_cols index-vectors (t_tables fields of b_idx bits,
    // little-endian, ivec_stride bytes apart), add the sum of the addressed
    // table entries to acc[col]. Indices must already be validated < n_tb.
    void (*lookup_accumulate)(const int32_t* tables, int n_tb, int t_tables, int b_idx,
                              const uint8_t* ivecs, size_t ivec_stride, int n_cols, int32_t* acc);

    // out[i] = clamp(round_half_away_from_zero(x[i] / scale), -127, +127)
    void (*quantize_i8)(const float* x, int n, float scale, int8_t* out);

    float (*absmax_f32)(const float* x, int n);       // max |x[i]|, 0 when n == 0
    float (*sum_squares_f32)(const float* x, int n);  // float-accumulated
    float (*dot_f32)(const float* a, const float* b, int n);
    int32_t (*dot_i8i8)(const int8_t* a, const int8_t* b, int n);

    void (*scale_f32)(const int32_t* in, int n, float s, float* out);  // out[i] = in[i] * s
    void (*add_f32)(const float* a, const float* b, int n, float* out);
    void (*rescale_add_f32)(float alpha, float* o, float beta, const float* v, int n);  // o = a*o + b*v
};

bool isa_supported(Isa isa);
const Kernels& get(Isa isa);  // throws std::invalid_argument if unsupported

// Active table: best supported ISA at startup, overridable via the
// TLLM_KERNELS env var ("scalar" / "avx2") or force().
const Kernels& active();
Isa active_isa();
void force(Isa isa);
void select_best();

const char* isa_name(Isa isa);

}  // namespace tllm::kernels
