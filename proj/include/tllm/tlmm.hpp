// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tllm/core.hpp"

namespace tllm {

int64_t pow3(int g);

/// Table-lookup matmul parameters.
///   g: trits per group (group size G)
///   t: tables built per step / indices per index-vector (T)
///   q: parallel lookups per table per step (Q)
struct TlmmParams {
    int g = 3;
    int t = 4;
    int q = 4;

    bool operator==(const TlmmParams&) const = default;

    int64_t n_tb() const { return pow3(g); }           // table entries per group
    int b_idx() const;                                 // ceil(log2 3^g) bits per index
    int b_tb() const;                                  // 8 + ceil(log2 g) bits per entry
    int group_stride() const { return t * g; }         // input rows consumed per step
    int ivec_bits() const { return t * b_idx(); }      // packed index-vector width
    int ivec_bytes() const { return (ivec_bits() + 7) / 8; }

    void validate() const;  // g in [1,16], t >= 1, q >= 1
};

/// Base-3 group encoding, digit 0 least significant, digit = trit + 1.
uint32_t encode_group(std::span<const int8_t> trits);
void decode_group(uint32_t index, int g, int8_t* trits_out);

/// Index of the all-zero trit group: digits 11...1 = (3^g - 1) / 2.
uint32_t zero_group_index(int g);

/// Offline-encoded weight matrix: one b_idx-bit index per trit group, t
/// indices packed little-endian into each index-vector. Rows are padded to a
/// multiple of t*g with all-zero trit groups, so padded lanes contribute
/// nothing and activations never need padding by the caller.
struct PackedWeights {
    int logical_rows = 0;
    int logical_cols = 0;
    int padded_rows = 0;
    float weight_scale = 1.0f;
    TlmmParams params;
    int ivec_bytes = 0;
    // [block_row][col][ivec_bytes], plus 8 bytes of slack for the bit reader
    std::vector<uint8_t> indices;

    int block_rows() const { return padded_rows / params.group_stride(); }
    size_t payload_bytes() const {
        return static_cast<size_t>(block_rows()) * logical_cols * ivec_bytes;
    }
    const uint8_t* ivec(int block_row, int col) const {
        return indices.data() + (static_cast<size_t>(block_row) * logical_cols + col) * ivec_bytes;
    }
    uint8_t* ivec(int block_row, int col) {
        return indices.data() + (static_cast<size_t>(block_row) * logical_cols + col) * ivec_bytes;
    }

    /// Re-checks every structural invariant: index range, padding groups
    /// decoding to zero trits, storage size. Throws FormatError.
    void validate() const;
};

PackedWeights encode_weights(const TernaryMatrix& w, const TlmmParams& params, float weight_scale = 1.0f);

/// Exact inverse of encode_weights on the logical rows. Throws FormatError if
/// any index is out of range or a padding group is not the all-zero group.
TernaryMatrix decode_weights(const PackedWeights& pw);

/// One online-precomputed table: all 3^g partial sums of an activation group.
struct LookupTable {
    int g = 0;
    std::vector<int16_t> entries;  // 3^g, |entry| <= 127*g (fits b_tb bits)
};

LookupTable build_table(std::span<const int8_t> activation_group, const TlmmParams& params);

/// Full-storage table-lookup matmul (all 3^g entries per table). Bit-exact
/// equal to ternary_matmul_naive(a, decode_weights(pw)). Rows of `a` may be
/// processed by multiple threads; results do not depend on the partitioning.
Int32Matrix tlmm_matmul(const QuantizedActivations& a, const PackedWeights& pw, int threads = 1);

/// Partial-storage variant: stores only the (3^g - 1)/2 positive-group sums
/// and sign-inverts lookups of negative groups; the all-zero group is the
/// reserved zero state. Same output contract as tlmm_matmul.
Int32Matrix tlmm_matmul_partial_table(const QuantizedActivations& a, const PackedWeights& pw);

/// Entries stored by the partial method for group size g: (3^g - 1) / 2.
int64_t partial_table_entries(int g);

}  // namespace tllm
