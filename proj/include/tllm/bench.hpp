// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "tllm/tlmm.hpp"

namespace tllm::bench {

/// Paired-kernel comparison on one random instance: the two table-lookup
/// methods against the naive selection oracle, value equivalence asserted.
struct TlmmCompare {
    int m = 0, n = 0, k = 0;
    TlmmParams params;
    double naive_seconds = 0.0;
    double full_seconds = 0.0;
    double partial_seconds = 0.0;
    bool full_matches = false;
    bool partial_matches = false;

    bool ok() const { return full_matches && partial_matches; }
};

TlmmCompare compare_tlmm(int m, int n, int k, const TlmmParams& params, uint64_t seed, int reps = 3);

/// Reversed-schedule vs forward-schedule prefill attention on one instance:
/// identical inputs and processing element count, identical outputs required.
struct AttnCompare {
    int n = 0, n_heads = 0, d_head = 0, n_pe = 0;
    double reversed_seconds = 0.0;
    double naive_seconds = 0.0;
    uint64_t reversed_score_ops = 0;  // n(n+1)/2
    uint64_t naive_score_ops = 0;     // n^2
    float max_abs_diff = 0.0f;
    bool matches = false;

    double score_op_ratio() const {
        return static_cast<double>(naive_score_ops) / static_cast<double>(reversed_score_ops);
    }
};

AttnCompare compare_attention(int n, int n_heads, int d_head, int n_pe, uint64_t seed, int reps = 3);

}  // namespace tllm::bench
