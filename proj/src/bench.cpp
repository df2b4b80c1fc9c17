// SPDX-License-Identifier: Apache-2.0
#include "tllm/bench.hpp"

#include <chrono>
#include <random>

#include "tllm/attention.hpp"

namespace tllm::bench {

namespace {

using clock_t_ = std::chrono::steady_clock;

template <typename F>
double best_of(int reps, F&& fn) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = clock_t_::now();
        fn();
        const double s = std::chrono::duration<double>(clock_t_::now() - t0).count();
        best = std::min(best, s);
    }
    return best;
}

}  // namespace

TlmmCompare compare_tlmm(int m, int n, int k, const TlmmParams& params, uint64_t seed, int reps) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> val(-127, 127);
    std::uniform_int_distribution<int> trit(-1, 1);

    QuantizedActivations a(m, n);
    for (auto& x : a.values) x = static_cast<int8_t>(val(rng));
    TernaryMatrix w(n, k);
    for (auto& x : w.t) x = static_cast<int8_t>(trit(rng));
    const PackedWeights pw = encode_weights(w, params);

    TlmmCompare r;
    r.m = m;
    r.n = n;
    r.k = k;
    r.params = params;

    Int32Matrix ref, full, partial;
    r.naive_seconds = best_of(reps, [&] { ref = ternary_matmul_naive(a, w); });
    r.full_seconds = best_of(reps, [&] { full = tlmm_matmul(a, pw); });
    r.partial_seconds = best_of(reps, [&] { partial = tlmm_matmul_partial_table(a, pw); });
    r.full_matches = full.v == ref.v;
    r.partial_matches = partial.v == ref.v;
    return r;
}

AttnCompare compare_attention(int n, int n_heads, int d_head, int n_pe, uint64_t seed, int reps) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);

    const int width = n_heads * d_head;
    FloatMatrix q(n, width), k(n, width), v(n, width);
    for (auto& x : q.v) x = dist(rng);
    for (auto& x : k.v) x = dist(rng);
    for (auto& x : v.v) x = dist(rng);

    AttnCompare r;
    r.n = n;
    r.n_heads = n_heads;
    r.d_head = d_head;
    r.n_pe = n_pe;

    FloatMatrix reversed, naive;
    r.reversed_seconds = best_of(reps, [&] {
        KvCache cache(n, n_heads, d_head);
        AttnPerf perf;
        reversed = prefill_attention(q, k, v, n_pe, cache, &perf);
        r.reversed_score_ops = perf.score_ops;
    });
    r.naive_seconds = best_of(reps, [&] {
        KvCache cache(n, n_heads, d_head);
        AttnPerf perf;
        naive = prefill_attention_naive(q, k, v, n_pe, cache, &perf);
        r.naive_score_ops = perf.score_ops;
    });

    r.max_abs_diff = 0.0f;
    for (size_t i = 0; i < reversed.v.size(); ++i) {
        r.max_abs_diff = std::max(r.max_abs_diff, std::fabs(reversed.v[i] - naive.v[i]));
    }
    r.matches = r.max_abs_diff == 0.0f;
    return r;
}

}  // namespace tllm::bench
