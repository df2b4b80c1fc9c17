// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <limits>
#include <span>

#include "tllm/core.hpp"

namespace tllm {

/// Online-softmax running triple for one (query, head) pair.
struct AttnState {
    float m = -std::numeric_limits<float>::infinity();  // running maximum
    float ell = 0.0f;                                   // running denominator
    FloatVector o;                                      // running numerator

    explicit AttnState(int d_head) : o(d_head, 0.0f) {}
};

/// One online-softmax step: fold score s and value v into the state.
///   m' = max(m, s);  ell' = e^(m-m')*ell + e^(s-m');  o' = e^(m-m')*o + e^(s-m')*v
/// The -inf initial state reduces the first update to (s, 1, v).
void online_update(AttnState& state, float s, std::span<const float> v);

/// o / ell. Requires at least one prior update.
FloatVector attn_output(const AttnState& state);

/// Per-layer K/V store in canonical (forward) position order. K rows are
/// post-RoPE.
struct KvCache {
    int max_seq = 0;
    int n_heads = 0;
    int d_head = 0;
    int len = 0;
    FloatMatrix k;  // [max_seq][n_heads * d_head]
    FloatMatrix v;

    KvCache() = default;
    KvCache(int max_seq_, int n_heads_, int d_head_);

    int width() const { return n_heads * d_head; }
    void append(std::span<const float> k_row, std::span<const float> v_row);
    void reset() { len = 0; }
};

/// Count of evaluated score-map positions (query, key pairs; heads share one
/// count). Exposed for the benchmark harness.
struct AttnPerf {
    uint64_t score_ops = 0;
};

/// Fused prefill attention with the reversed block schedule: query blocks of
/// up to n_pe tokens are processed newest-first, and after each block
/// completes, that block's trailing K/V positions are evicted, so causally
/// masked pairs are never scored (exactly N(N+1)/2 score ops). Inputs are
/// post-RoPE q/k and v, shaped [N][n_heads*d_head]; K/V are written to the
/// (empty) cache in canonical order, and output rows are emitted in
/// canonical order.
FloatMatrix prefill_attention(const FloatMatrix& q, const FloatMatrix& k, const FloatMatrix& v,
                              int n_pe, KvCache& cache, AttnPerf* perf = nullptr);

/// Forward block schedule that scores every (i, j) pair and discards masked
/// ones (N^2 score ops). Same outputs; exists for the schedule ablation.
FloatMatrix prefill_attention_naive(const FloatMatrix& q, const FloatMatrix& k, const FloatMatrix& v,
                                    int n_pe, KvCache& cache, AttnPerf* perf = nullptr);

/// Two-pass decode attention over the cache: pass 1 streams K computing all
/// scores with a running max and exponent-sum (scores stay buffered), pass 2
/// streams V aggregating softmax-weighted values. The current token's K/V
/// must already be appended.
FloatVector decode_attention(std::span<const float> q, const KvCache& cache, AttnPerf* perf = nullptr);

}  // namespace tllm
