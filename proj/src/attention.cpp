// SPDX-License-Identifier: Apache-2.0
#include "tllm/attention.hpp"

#include <cmath>
#include <cstring>

#include "tllm/kernels.hpp"

namespace tllm {

void online_update(AttnState& state, float s, std::span<const float> v) {
    if (!std::isfinite(s)) {
        throw NumericError("online_update: non-finite score");
    }
    if (v.size() != state.o.size()) {
        throw ShapeError("online_update: value length != d_head");
    }
    const float new_m = std::max(state.m, s);
    const float alpha = std::exp(state.m - new_m);  // 0 from the -inf initial state
    const float beta = std::exp(s - new_m);
    state.ell = alpha * state.ell + beta;
    kernels::active().rescale_add_f32(alpha, state.o.data(), beta, v.data(),
                                      static_cast<int>(v.size()));
    state.m = new_m;
}

FloatVector attn_output(const AttnState& state) {
    if (!(state.ell > 0.0f)) {
        throw StateError("attn_output: no updates applied");
    }
    FloatVector out(state.o.size());
    const float inv = 1.0f / state.ell;
    for (size_t i = 0; i < out.size(); ++i) out[i] = state.o[i] * inv;
    return out;
}

KvCache::KvCache(int max_seq_, int n_heads_, int d_head_)
    : max_seq(max_seq_), n_heads(n_heads_), d_head(d_head_), len(0),
      k(max_seq_, n_heads_ * d_head_), v(max_seq_, n_heads_ * d_head_) {
    if (max_seq_ < 1 || n_heads_ < 1 || d_head_ < 1) {
        throw ShapeError("KvCache: dimensions must be >= 1");
    }
}

void KvCache::append(std::span<const float> k_row, std::span<const float> v_row) {
    if (static_cast<int>(k_row.size()) != width() || static_cast<int>(v_row.size()) != width()) {
        throw ShapeError("KvCache::append: row width mismatch");
    }
    if (len >= max_seq) {
        throw CapacityError("KvCache::append: cache full");
    }
    std::memcpy(k.row(len).data(), k_row.data(), sizeof(float) * k_row.size());
    std::memcpy(v.row(len).data(), v_row.data(), sizeof(float) * v_row.size());
    ++len;
}

namespace {

void check_prefill_args(const FloatMatrix& q, const FloatMatrix& k, const FloatMatrix& v, int n_pe,
                        const KvCache& cache) {
    if (q.rows < 1) throw ShapeError("prefill_attention: need at least one token");
    if (n_pe < 1) throw std::invalid_argument("prefill_attention: n_pe must be >= 1");
    if (k.rows != q.rows || v.rows != q.rows || k.cols != q.cols || v.cols != q.cols) {
        throw ShapeError("prefill_attention: q/k/v shapes differ");
    }
    if (q.cols != cache.width()) {
        throw ShapeError("prefill_attention: width != cache n_heads*d_head");
    }
    if (cache.len != 0) {
        throw StateError("prefill_attention: cache must be empty");
    }
    if (q.rows > cache.max_seq) {
        throw CapacityError("prefill_attention: sequence exceeds max_seq");
    }
}

// Shared block engine. With reversed=true, only unmasked (j <= i) pairs are
// scored; with reversed=false every pair in the block's K sweep is scored and
// masked ones are discarded after the fact (Fig-5b-style schedule).
FloatMatrix prefill_blocks(const FloatMatrix& q, const FloatMatrix& k, const FloatMatrix& v, int n_pe,
                           KvCache& cache, AttnPerf* perf, bool reversed) {
    check_prefill_args(q, k, v, n_pe, cache);
    const kernels::Kernels& kn = kernels::active();
    const int n = q.rows;
    const int n_heads = cache.n_heads;
    const int d_head = cache.d_head;
    const float scale = 1.0f / std::sqrt(static_cast<float>(d_head));

    for (int i = 0; i < n; ++i) cache.append(k.row(i), v.row(i));

    FloatMatrix out(n, q.cols);
    // newest block first; remainder block (if any) is the newest one
    int remainder = n % n_pe;
    if (remainder == 0) remainder = n_pe;

    int hi = n;
    while (hi > 0) {
        const int lo = hi - (hi == n ? remainder : n_pe);
        std::vector<AttnState> states(static_cast<size_t>(hi - lo) * n_heads, AttnState(d_head));

        const int k_sweep = reversed ? hi : n;
        for (int j = 0; j < k_sweep; ++j) {
            const float* k_row = cache.k.row(j).data();
            const float* v_row = cache.v.row(j).data();
            const int i_begin = reversed ? std::max(j, lo) : lo;
            for (int i = i_begin; i < hi; ++i) {
                if (perf) ++perf->score_ops;
                const bool masked = j > i;
                for (int h = 0; h < n_heads; ++h) {
                    const float s =
                        kn.dot_f32(q.row(i).data() + h * d_head, k_row + h * d_head, d_head) * scale;
                    if (!masked) {
                        online_update(states[static_cast<size_t>(i - lo) * n_heads + h], s,
                                      {v_row + h * d_head, static_cast<size_t>(d_head)});
                    }
                }
            }
        }
        for (int i = lo; i < hi; ++i) {
            for (int h = 0; h < n_heads; ++h) {
                const FloatVector oh = attn_output(states[static_cast<size_t>(i - lo) * n_heads + h]);
                std::memcpy(out.row(i).data() + h * d_head, oh.data(), sizeof(float) * d_head);
            }
        }
        hi = lo;  // evict this block's trailing K/V positions
    }
    return out;
}

}  // namespace

FloatMatrix prefill_attention(const FloatMatrix& q, const FloatMatrix& k, const FloatMatrix& v,
                              int n_pe, KvCache& cache, AttnPerf* perf) {
    return prefill_blocks(q, k, v, n_pe, cache, perf, /*reversed=*/true);
}

FloatMatrix prefill_attention_naive(const FloatMatrix& q, const FloatMatrix& k, const FloatMatrix& v,
                                    int n_pe, KvCache& cache, AttnPerf* perf) {
    return prefill_blocks(q, k, v, n_pe, cache, perf, /*reversed=*/false);
}

FloatVector decode_attention(std::span<const float> q, const KvCache& cache, AttnPerf* perf) {
    if (cache.len < 1) {
        throw StateError("decode_attention: cache is empty");
    }
    if (static_cast<int>(q.size()) != cache.width()) {
        throw ShapeError("decode_attention: query width mismatch");
    }
    const kernels::Kernels& kn = kernels::active();
    const int d_head = cache.d_head;
    const float scale = 1.0f / std::sqrt(static_cast<float>(d_head));

    FloatVector out(q.size(), 0.0f);
    FloatVector scores(cache.len);
    if (perf) perf->score_ops += static_cast<uint64_t>(cache.len);

    for (int h = 0; h < cache.n_heads; ++h) {
        const float* qh = q.data() + h * d_head;
        // pass 1: stream K, buffer scores, track running max and exponent sum
        float m = -std::numeric_limits<float>::infinity();
        float ell = 0.0f;
        for (int j = 0; j < cache.len; ++j) {
            const float s = kn.dot_f32(qh, cache.k.row(j).data() + h * d_head, d_head) * scale;
            scores[j] = s;
            const float new_m = std::max(m, s);
            ell = ell * std::exp(m - new_m) + std::exp(s - new_m);
            m = new_m;
        }
        // pass 2: stream V, aggregate softmax-weighted values
        float* oh = out.data() + h * d_head;
        const float inv_ell = 1.0f / ell;
        for (int j = 0; j < cache.len; ++j) {
            const float w = std::exp(scores[j] - m) * inv_ell;
            kn.rescale_add_f32(1.0f, oh, w, cache.v.row(j).data() + h * d_head, d_head);
        }
    }
    return out;
}

}  // namespace tllm
