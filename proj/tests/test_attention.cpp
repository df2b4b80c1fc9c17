// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "testing.hpp"
#include "tllm/attention.hpp"

using namespace tllm;

TEST_SUITE_BEGIN("attention");

TEST_CASE("online_update: first update reduces the initial state") {
    AttnState s(4);
    const FloatVector v = {1.0f, -2.0f, 0.5f, 3.0f};
    online_update(s, -0.7f, v);
    CHECK(s.m == -0.7f);
    CHECK(s.ell == 1.0f);
    CHECK(s.o == v);
}

TEST_CASE("online_update: two equal scores average the values") {
    AttnState s(2);
    online_update(s, 1.3f, FloatVector{2.0f, 0.0f});
    online_update(s, 1.3f, FloatVector{0.0f, 4.0f});
    const FloatVector out = attn_output(s);
    CHECK(out[0] == doctest::Approx(1.0f));
    CHECK(out[1] == doctest::Approx(2.0f));
}

TEST_CASE("online_update: matches dense softmax oracle; m monotone, ell positive") {
    tt::Rng rng(51);
    for (int iter = 0; iter < 20; ++iter) {
        const int n = 1 + static_cast<int>(rng() % 24);
        const int d = 8;
        std::vector<float> scores;
        std::vector<FloatVector> values;
        for (int j = 0; j < n; ++j) {
            scores.push_back(tt::random_vec(rng, 1, -4.0f, 4.0f)[0]);
            values.push_back(tt::random_vec(rng, d));
        }
        AttnState s(d);
        float prev_m = -std::numeric_limits<float>::infinity();
        for (int j = 0; j < n; ++j) {
            online_update(s, scores[j], values[j]);
            CHECK(s.m >= prev_m);
            CHECK(s.ell > 0.0f);
            prev_m = s.m;
        }
        const FloatVector out = attn_output(s);

        const double m = *std::max_element(scores.begin(), scores.end());
        double denom = 0.0;
        for (float sc : scores) denom += std::exp(sc - m);
        for (int dd = 0; dd < d; ++dd) {
            double acc = 0.0;
            for (int j = 0; j < n; ++j) acc += std::exp(scores[j] - m) / denom * values[j][dd];
            CHECK(out[dd] == doctest::Approx(acc).epsilon(1e-5));
        }
    }
}

TEST_CASE("online_update: permutation invariance of the final output") {
    tt::Rng rng(52);
    const int n = 12, d = 6;
    std::vector<float> scores;
    std::vector<FloatVector> values;
    for (int j = 0; j < n; ++j) {
        scores.push_back(tt::random_vec(rng, 1, -3.0f, 3.0f)[0]);
        values.push_back(tt::random_vec(rng, d));
    }
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    AttnState ref(d);
    for (int j : order) online_update(ref, scores[j], values[j]);
    const FloatVector ref_out = attn_output(ref);

    for (int shuffle = 0; shuffle < 5; ++shuffle) {
        std::shuffle(order.begin(), order.end(), rng);
        AttnState s(d);
        for (int j : order) online_update(s, scores[j], values[j]);
        CHECK(tt::max_abs_diff(attn_output(s), ref_out) <= 1e-5f);
    }
}

TEST_CASE("online_update: rejects non-finite scores; attn_output needs an update") {
    AttnState s(2);
    CHECK_THROWS_AS(online_update(s, std::nanf(""), FloatVector{0, 0}), NumericError);
    CHECK_THROWS_AS(attn_output(s), StateError);
    CHECK_THROWS_AS(online_update(s, 0.0f, FloatVector{0, 0, 0}), ShapeError);
}

TEST_CASE("prefill: single token returns its value row") {
    tt::Rng rng(53);
    const FloatMatrix q = tt::random_mat(rng, 1, 8);
    const FloatMatrix k = tt::random_mat(rng, 1, 8);
    const FloatMatrix v = tt::random_mat(rng, 1, 8);
    KvCache cache(4, 2, 4);
    const FloatMatrix out = prefill_attention(q, k, v, 4, cache);
    CHECK(tt::max_abs_diff(out.row(0), v.row(0)) <= 1e-6f);
    CHECK(cache.len == 1);
}

TEST_CASE("prefill: matches dense reference, counts N(N+1)/2 score ops") {
    tt::Rng rng(54);
    for (const auto& [n, n_pe, heads, d_head] :
         {std::tuple{8, 4, 2, 8}, std::tuple{10, 4, 1, 16}, std::tuple{5, 8, 4, 4},
          std::tuple{16, 8, 2, 8}, std::tuple{7, 3, 3, 6}}) {
        const int width = heads * d_head;
        const FloatMatrix q = tt::random_mat(rng, n, width);
        const FloatMatrix k = tt::random_mat(rng, n, width);
        const FloatMatrix v = tt::random_mat(rng, n, width);
        KvCache cache(n, heads, d_head);
        AttnPerf perf;
        const FloatMatrix out = prefill_attention(q, k, v, n_pe, cache, &perf);

        CHECK(perf.score_ops == static_cast<uint64_t>(n) * (n + 1) / 2);
        const FloatMatrix ref = tt::dense_causal_attention(q, k, v, heads, d_head);
        CHECK(tt::max_abs_diff(out.v, ref.v) <= 1e-5f);

        // cache holds the canonical-order K/V
        for (int i = 0; i < n; ++i) {
            CHECK(tt::max_abs_diff(cache.k.row(i), k.row(i)) == 0.0f);
            CHECK(tt::max_abs_diff(cache.v.row(i), v.row(i)) == 0.0f);
        }
    }
}

TEST_CASE("prefill: naive schedule scores N^2 pairs but emits identical rows") {
    tt::Rng rng(55);
    const int n = 12, heads = 2, d_head = 8;
    const FloatMatrix q = tt::random_mat(rng, n, heads * d_head);
    const FloatMatrix k = tt::random_mat(rng, n, heads * d_head);
    const FloatMatrix v = tt::random_mat(rng, n, heads * d_head);

    KvCache c1(n, heads, d_head), c2(n, heads, d_head);
    AttnPerf p1, p2;
    const FloatMatrix reversed = prefill_attention(q, k, v, 4, c1, &p1);
    const FloatMatrix naive = prefill_attention_naive(q, k, v, 4, c2, &p2);

    CHECK(p1.score_ops == static_cast<uint64_t>(n) * (n + 1) / 2);
    CHECK(p2.score_ops == static_cast<uint64_t>(n) * n);
    CHECK(reversed.v == naive.v);  // same updates in the same order
}

TEST_CASE("prefill: capacity and state errors") {
    tt::Rng rng(56);
    const FloatMatrix q = tt::random_mat(rng, 5, 8);
    KvCache small(4, 2, 4);
    CHECK_THROWS_AS(prefill_attention(q, q, q, 2, small), CapacityError);

    KvCache cache(8, 2, 4);
    const FloatMatrix q2 = tt::random_mat(rng, 3, 8);
    prefill_attention(q2, q2, q2, 2, cache);
    CHECK_THROWS_AS(prefill_attention(q2, q2, q2, 2, cache), StateError);
}

TEST_CASE("decode: single cached token returns v0; uniform keys average") {
    tt::Rng rng(57);
    KvCache cache(8, 2, 4);
    const FloatVector k0 = tt::random_vec(rng, 8);
    const FloatVector v0 = tt::random_vec(rng, 8);
    cache.append(k0, v0);
    const FloatVector q = tt::random_vec(rng, 8);
    CHECK(tt::max_abs_diff(decode_attention(q, cache), v0) <= 1e-6f);

    // identical keys -> equal scores -> mean of values
    KvCache uni(8, 1, 4);
    FloatVector mean(4, 0.0f);
    const FloatVector key = tt::random_vec(rng, 4);
    for (int j = 0; j < 6; ++j) {
        const FloatVector vj = tt::random_vec(rng, 4);
        uni.append(key, vj);
        for (int d = 0; d < 4; ++d) mean[d] += vj[d] / 6.0f;
    }
    CHECK(tt::max_abs_diff(decode_attention(tt::random_vec(rng, 4), uni), mean) <= 1e-5f);
}

TEST_CASE("decode: matches dense oracle on a 17-entry cache") {
    tt::Rng rng(58);
    const int len = 17, heads = 3, d_head = 8;
    const int width = heads * d_head;
    const FloatMatrix k = tt::random_mat(rng, len, width);
    const FloatMatrix v = tt::random_mat(rng, len, width);
    KvCache cache(32, heads, d_head);
    for (int j = 0; j < len; ++j) cache.append(k.row(j), v.row(j));

    const FloatVector qv = tt::random_vec(rng, width);
    AttnPerf perf;
    const FloatVector out = decode_attention(qv, cache, &perf);
    CHECK(perf.score_ops == static_cast<uint64_t>(len));

    // oracle: dense causal attention with the query as the last row
    FloatMatrix qm(len, width);
    FloatMatrix km = k, vm = v;
    std::copy(qv.begin(), qv.end(), qm.row(len - 1).begin());
    const FloatMatrix ref = tt::dense_causal_attention(qm, km, vm, heads, d_head);
    CHECK(tt::max_abs_diff(out, ref.row(len - 1)) <= 1e-5f);

    KvCache empty(4, 1, 4);
    CHECK_THROWS_AS(decode_attention(FloatVector(4, 0.0f), empty), StateError);
}

TEST_CASE("decode extends prefill consistently") {
    tt::Rng rng(59);
    const int n = 9, heads = 2, d_head = 8;
    const int width = heads * d_head;
    const FloatMatrix q = tt::random_mat(rng, n + 1, width);
    const FloatMatrix k = tt::random_mat(rng, n + 1, width);
    const FloatMatrix v = tt::random_mat(rng, n + 1, width);

    // path A: prefill first n, then decode token n
    FloatMatrix qa(n, width), ka(n, width), va(n, width);
    std::copy(q.v.begin(), q.v.begin() + static_cast<size_t>(n) * width, qa.v.begin());
    std::copy(k.v.begin(), k.v.begin() + static_cast<size_t>(n) * width, ka.v.begin());
    std::copy(v.v.begin(), v.v.begin() + static_cast<size_t>(n) * width, va.v.begin());
    KvCache cache(16, heads, d_head);
    prefill_attention(qa, ka, va, 4, cache);
    cache.append(k.row(n), v.row(n));
    const FloatVector dec = decode_attention(q.row(n), cache);

    // path B: one prefill over n+1 rows
    KvCache cache_b(16, heads, d_head);
    const FloatMatrix full = prefill_attention(q, k, v, 4, cache_b);
    CHECK(tt::max_abs_diff(dec, full.row(n)) <= 1e-4f);
}

TEST_CASE("kv cache capacity") {
    KvCache cache(2, 1, 4);
    const FloatVector r(4, 1.0f);
    cache.append(r, r);
    cache.append(r, r);
    CHECK_THROWS_AS(cache.append(r, r), CapacityError);
    cache.reset();
    CHECK(cache.len == 0);
    CHECK_NOTHROW(cache.append(r, r));
}

TEST_SUITE_END();
