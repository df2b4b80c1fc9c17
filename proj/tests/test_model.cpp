// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "testing.hpp"
#include "tllm/model.hpp"
#include "tllm/weights_io.hpp"

using namespace tllm;

namespace {

// the 2-layer toy configuration used for decode/prefill consistency
ModelConfig toy_config() {
    return ModelConfig{.d_model = 96, .d_ffn = 256, .n_layers = 2, .n_heads = 4,
                       .max_seq = 20, .vocab = 48, .rms_eps = 1e-5f};
}

ModelWeights toy_model(uint64_t seed) {
    const ModelConfig cfg = toy_config();
    return load_model(pack_model(make_toy_model(cfg, seed), TlmmParams{3, 4, 2}));
}

PackedWeights pack_trits(const TernaryMatrix& w, float scale = 1.0f) {
    return encode_weights(w, TlmmParams{3, 2, 2}, scale);
}

}  // namespace

TEST_SUITE_BEGIN("model");

TEST_CASE("forward_layer: zero input with zero gammas stays zero") {
    tt::Rng rng(71);
    const ModelConfig cfg{.d_model = 8, .d_ffn = 12, .n_layers = 1, .n_heads = 2,
                          .max_seq = 8, .vocab = 10, .rms_eps = 1e-5f};
    LayerWeights layer;
    layer.wq = pack_trits(tt::random_ternary(rng, 8, 8));
    layer.wk = pack_trits(tt::random_ternary(rng, 8, 8));
    layer.wv = pack_trits(tt::random_ternary(rng, 8, 8));
    layer.wo = pack_trits(tt::random_ternary(rng, 8, 8));
    layer.w_gate = pack_trits(tt::random_ternary(rng, 8, 12));
    layer.w_up = pack_trits(tt::random_ternary(rng, 8, 12));
    layer.w_down = pack_trits(tt::random_ternary(rng, 12, 8));
    layer.rms1.gamma.assign(8, 0.0f);
    layer.rms2.gamma.assign(8, 0.0f);

    KvCache cache(cfg.max_seq, cfg.n_heads, cfg.d_head());
    const RopeCache rope = RopeCache::build(cfg.max_seq, cfg.d_head());
    const FloatMatrix x(3, 8);  // zeros
    const FloatMatrix out = forward_layer(x, layer, Phase::prefill, cache, rope, cfg);
    for (float v : out.v) CHECK(v == 0.0f);
}

TEST_CASE("forward_layer: constructed FFN acts as attention plus scaled copy") {
    tt::Rng rng(72);
    const int d = 8;
    const ModelConfig cfg{.d_model = d, .d_ffn = d, .n_layers = 1, .n_heads = 2,
                          .max_seq = 8, .vocab = 10, .rms_eps = 1e-5f};

    LayerWeights layer;
    layer.wq = pack_trits(tt::random_ternary(rng, d, d));
    layer.wk = pack_trits(tt::random_ternary(rng, d, d));
    layer.wv = pack_trits(TernaryMatrix(d, d));  // zero values -> attention output 0
    layer.wo = pack_trits(tt::random_ternary(rng, d, d));

    TernaryMatrix all_plus(d, d);
    for (auto& t : all_plus.t) t = 1;  // saturating gate for positive activations
    TernaryMatrix eye(d, d);
    for (int i = 0; i < d; ++i) eye.at(i, i) = 1;
    layer.w_gate = pack_trits(all_plus);
    layer.w_up = pack_trits(eye);
    layer.w_down = pack_trits(eye);
    layer.rms1.gamma.assign(d, 1.0f);
    layer.rms2.gamma.assign(d, 1.0f);

    FloatMatrix x(1, d);
    for (int i = 0; i < d; ++i) x.at(0, i) = 2.0f + 0.1f * i;  // all positive

    KvCache cache(cfg.max_seq, cfg.n_heads, cfg.d_head());
    const RopeCache rope = RopeCache::build(cfg.max_seq, cfg.d_head());
    const FloatMatrix out = forward_layer(x, layer, Phase::prefill, cache, rope, cfg);

    // zero-value attention means the residual carries x through unchanged;
    // mirror the FFN with the public ops and the naive matmul route
    const RmsMaxResult r = rms_max(x.row(0), layer.rms2, cfg.rms_eps);
    const QuantizedRow qr = quantize_absmax(r.normed, r.absmax);
    QuantizedActivations qa(1, d);
    std::copy(qr.values.begin(), qr.values.end(), qa.values.begin());
    qa.row_scale[0] = qr.scale;

    const FloatVector gate = dequantize(ternary_matmul_naive(qa, all_plus).row(0), qr.scale,
                                        layer.w_gate.weight_scale);
    const FloatVector up =
        dequantize(ternary_matmul_naive(qa, eye).row(0), qr.scale, layer.w_up.weight_scale);
    const FloatVector sw = swiglu(gate, up);

    // gate saturates, so swiglu is elementwise gate * up within a fraction of a percent
    for (int j = 0; j < d; ++j) {
        CHECK(gate[j] > 5.0f);
        CHECK(sw[j] == doctest::Approx(gate[j] * up[j]).epsilon(5e-3));
    }

    const QuantizedRow qs = quantize_absmax(sw, absmax_of(sw));
    QuantizedActivations qsa(1, d);
    std::copy(qs.values.begin(), qs.values.end(), qsa.values.begin());
    qsa.row_scale[0] = qs.scale;
    const FloatVector down = dequantize(ternary_matmul_naive(qsa, eye).row(0), qs.scale,
                                        layer.w_down.weight_scale);
    const FloatVector expect = residual_add(x.row(0), down);
    CHECK(tt::max_abs_diff(out.row(0), expect) <= 1e-6f);
}

TEST_CASE("forward_layer: decode takes exactly one row") {
    const ModelWeights mw = toy_model(5);
    KvCache cache(mw.config.max_seq, mw.config.n_heads, mw.config.d_head());
    const RopeCache rope = RopeCache::build(mw.config.max_seq, mw.config.d_head());
    tt::Rng rng(73);
    const FloatMatrix two = tt::random_mat(rng, 2, mw.config.d_model);
    CHECK_THROWS_AS(forward_layer(two, mw.layers[0], Phase::decode, cache, rope, mw.config),
                    ShapeError);
}

TEST_CASE("decode logits match full-prefill recompute (toy model)") {
    const ModelWeights mw = toy_model(1234);
    const std::vector<int32_t> prompt = {3, 17, 42, 8, 25, 31, 0, 11};

    Session session(mw, /*n_pe=*/8);
    FloatVector logits = session.prefill(prompt);
    std::vector<int32_t> ids = prompt;

    for (int step = 0; step < 4; ++step) {
        const int32_t next = argmax(logits);
        ids.push_back(next);
        logits = session.decode(next);

        // oracle: a fresh full prefill over the extended sequence
        Session recompute(mw, 8);
        const FloatVector ref = recompute.prefill(ids);
        CHECK(tt::max_abs_diff(logits, ref) <= 1e-3f);
        CHECK(argmax(logits) == argmax(ref));
    }
}

TEST_CASE("lm_head: zeros, float-reference accuracy, argmax stability") {
    tt::Rng rng(74);
    const int d = 64, vocab = 16;

    const FloatMatrix head_f = tt::random_mat(rng, d, vocab, -1.0f, 1.0f);
    LmHeadWeights head;
    head.d_model = d;
    head.vocab = vocab;
    head.w.resize(static_cast<size_t>(vocab) * d);
    head.scale.resize(vocab);
    for (int v = 0; v < vocab; ++v) {
        FloatVector col(d);
        for (int r = 0; r < d; ++r) col[r] = head_f.at(r, v);
        const QuantizedRow q = quantize_absmax(col, absmax_of(col));
        head.scale[v] = q.scale;
        std::copy(q.values.begin(), q.values.end(), head.w.begin() + static_cast<size_t>(v) * d);
    }

    const FloatVector zeros(d, 0.0f);
    for (float l : lm_head(zeros, head)) CHECK(l == 0.0f);

    int argmax_matches = 0;
    const int cases = 100;
    for (int iter = 0; iter < cases; ++iter) {
        const FloatVector x = tt::random_vec(rng, d, -2.0f, 2.0f);
        const FloatVector got = lm_head(x, head);

        FloatVector want(vocab, 0.0f);
        double want_max = 0.0;
        for (int v = 0; v < vocab; ++v) {
            double acc = 0.0;
            for (int r = 0; r < d; ++r) acc += static_cast<double>(x[r]) * head_f.at(r, v);
            want[v] = static_cast<float>(acc);
            want_max = std::max(want_max, std::fabs(acc));
        }
        for (int v = 0; v < vocab; ++v) {
            CHECK(std::fabs(got[v] - want[v]) <= 0.02 * want_max + 1e-4);
        }
        if (argmax(got) == argmax(want)) ++argmax_matches;
    }
    CHECK(argmax_matches >= 95);
}

TEST_CASE("generate: echo, determinism, capacity") {
    const ModelWeights mw = toy_model(77);
    const std::vector<int32_t> prompt = {1, 2, 3};

    CHECK(generate(mw, prompt, 0) == prompt);

    GenStats stats;
    const std::vector<int32_t> a = generate(mw, prompt, 6, 8, 1, &stats);
    const std::vector<int32_t> b = generate(mw, prompt, 6);
    CHECK(a == b);
    CHECK(a.size() == prompt.size() + 6);
    CHECK(std::equal(prompt.begin(), prompt.end(), a.begin()));
    CHECK(stats.decode_steps == 5);
    CHECK(stats.score_ops > 0);

    CHECK_THROWS_AS(generate(mw, prompt, 18), CapacityError);  // 3 + 18 > 20
    CHECK_THROWS_AS(generate(mw, {}, 1), std::invalid_argument);
}

TEST_CASE("generate: results independent of thread count") {
    const ModelWeights mw = toy_model(88);
    const std::vector<int32_t> prompt = {9, 4, 40, 2};
    CHECK(generate(mw, prompt, 5, 8, 1) == generate(mw, prompt, 5, 8, 4));
}

TEST_CASE("session: reuse guards and token validation") {
    const ModelWeights mw = toy_model(6);
    Session s(mw, 8);
    CHECK_THROWS_AS(s.prefill({}), std::invalid_argument);
    s.prefill(std::vector<int32_t>{1, 2});
    CHECK_THROWS_AS(s.prefill(std::vector<int32_t>{3}), StateError);
    CHECK_THROWS_AS(s.decode(1000), std::out_of_range);
    s.reset();
    CHECK_NOTHROW(s.prefill(std::vector<int32_t>{4, 5, 6}));
}

TEST_SUITE_END();
