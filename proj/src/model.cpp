// SPDX-License-Identifier: Apache-2.0
#include "tllm/model.hpp"

#include <chrono>
#include <cstring>

#include "tllm/kernels.hpp"

namespace tllm {

namespace {

void check_packed_dims(const PackedWeights& pw, int rows, int cols, const char* what) {
    if (pw.logical_rows != rows || pw.logical_cols != cols) {
        throw ShapeError(std::string("LayerWeights: ") + what + " has wrong shape");
    }
}

}  // namespace

void LayerWeights::validate(const ModelConfig& cfg) const {
    check_packed_dims(wq, cfg.d_model, cfg.d_model, "wq");
    check_packed_dims(wk, cfg.d_model, cfg.d_model, "wk");
    check_packed_dims(wv, cfg.d_model, cfg.d_model, "wv");
    check_packed_dims(wo, cfg.d_model, cfg.d_model, "wo");
    check_packed_dims(w_gate, cfg.d_model, cfg.d_ffn, "w_gate");
    check_packed_dims(w_up, cfg.d_model, cfg.d_ffn, "w_up");
    check_packed_dims(w_down, cfg.d_ffn, cfg.d_model, "w_down");
    for (const PackedWeights* pw : {&wq, &wk, &wv, &wo, &w_gate, &w_up, &w_down}) {
        pw->validate();
    }
    if (static_cast<int>(rms1.gamma.size()) != cfg.d_model ||
        static_cast<int>(rms2.gamma.size()) != cfg.d_model) {
        throw ShapeError("LayerWeights: rms gamma length != d_model");
    }
}

void LmHeadWeights::validate(const ModelConfig& cfg) const {
    if (d_model != cfg.d_model || vocab != cfg.vocab) {
        throw ShapeError("LmHeadWeights: shape does not match config");
    }
    if (w.size() != static_cast<size_t>(vocab) * d_model || scale.size() != static_cast<size_t>(vocab)) {
        throw ShapeError("LmHeadWeights: storage size mismatch");
    }
    for (int8_t x : w) {
        if (x < -127 || x > 127) {
            throw std::invalid_argument("LmHeadWeights: value outside [-127, 127]");
        }
    }
}

void ModelWeights::validate() const {
    config.validate();
    params.validate();
    if (static_cast<int>(layers.size()) != config.n_layers) {
        throw ShapeError("ModelWeights: layer count != n_layers");
    }
    if (embedding.rows != config.vocab || embedding.cols != config.d_model) {
        throw ShapeError("ModelWeights: embedding shape mismatch");
    }
    if (static_cast<int>(final_norm.gamma.size()) != config.d_model) {
        throw ShapeError("ModelWeights: final norm gamma length != d_model");
    }
    for (const LayerWeights& l : layers) {
        l.validate(config);
        for (const PackedWeights* pw : {&l.wq, &l.wk, &l.wv, &l.wo, &l.w_gate, &l.w_up, &l.w_down}) {
            if (!(pw->params == params)) {
                throw ShapeError("ModelWeights: layer packed with different tlmm params");
            }
        }
    }
    lm_head.validate(config);
}

namespace {

// rms_max + ABSMAX quantization over every row.
QuantizedActivations rms_quantize_rows(const FloatMatrix& x, const RmsNormWeights& gamma, float eps) {
    QuantizedActivations q(x.rows, x.cols);
    for (int i = 0; i < x.rows; ++i) {
        const RmsMaxResult r = rms_max(x.row(i), gamma, eps);
        const QuantizedRow qr = quantize_absmax(r.normed, r.absmax);
        std::memcpy(q.row(i).data(), qr.values.data(), qr.values.size());
        q.row_scale[i] = qr.scale;
    }
    return q;
}

FloatMatrix dequantize_rows(const Int32Matrix& o, const QuantizedActivations& act, float weight_scale) {
    FloatMatrix out(o.rows, o.cols);
    const kernels::Kernels& k = kernels::active();
    for (int i = 0; i < o.rows; ++i) {
        k.scale_f32(o.row(i).data(), o.cols, act.row_scale[i] * weight_scale,
                    out.row(i).data());
    }
    return out;
}

}  // namespace

FloatMatrix forward_layer(const FloatMatrix& x, const LayerWeights& layer, Phase phase,
                          KvCache& cache, const RopeCache& rope, const ModelConfig& cfg,
                          int n_pe, int threads, AttnPerf* perf) {
    if (x.cols != cfg.d_model) {
        throw ShapeError("forward_layer: input width != d_model");
    }
    if (phase == Phase::decode && x.rows != 1) {
        throw ShapeError("forward_layer: decode processes exactly one token");
    }
    const int n = x.rows;
    const int d_head = cfg.d_head();

    // attention block
    const QuantizedActivations xq = rms_quantize_rows(x, layer.rms1, cfg.rms_eps);
    FloatMatrix qf = dequantize_rows(tlmm_matmul(xq, layer.wq, threads), xq, layer.wq.weight_scale);
    FloatMatrix kf = dequantize_rows(tlmm_matmul(xq, layer.wk, threads), xq, layer.wk.weight_scale);
    FloatMatrix vf = dequantize_rows(tlmm_matmul(xq, layer.wv, threads), xq, layer.wv.weight_scale);

    for (int i = 0; i < n; ++i) {
        const int pos = phase == Phase::prefill ? i : cache.len;
        for (int h = 0; h < cfg.n_heads; ++h) {
            rope_consecutive_inplace(qf.row(i).data() + h * d_head, d_head, pos, rope);
            rope_consecutive_inplace(kf.row(i).data() + h * d_head, d_head, pos, rope);
        }
    }

    FloatMatrix attn(n, cfg.d_model);
    if (phase == Phase::prefill) {
        attn = prefill_attention(qf, kf, vf, n_pe, cache, perf);
    } else {
        cache.append(kf.row(0), vf.row(0));
        const FloatVector out = decode_attention(qf.row(0), cache, perf);
        std::memcpy(attn.row(0).data(), out.data(), sizeof(float) * out.size());
    }

    const QuantizedActivations aq = quantize_activations(attn);
    const FloatMatrix proj = dequantize_rows(tlmm_matmul(aq, layer.wo, threads), aq,
                                             layer.wo.weight_scale);
    FloatMatrix h(n, cfg.d_model);
    for (int i = 0; i < n; ++i) {
        kernels::active().add_f32(x.row(i).data(), proj.row(i).data(), cfg.d_model, h.row(i).data());
    }

    // FFN block
    const QuantizedActivations hq = rms_quantize_rows(h, layer.rms2, cfg.rms_eps);
    const FloatMatrix gate =
        dequantize_rows(tlmm_matmul(hq, layer.w_gate, threads), hq, layer.w_gate.weight_scale);
    const FloatMatrix up =
        dequantize_rows(tlmm_matmul(hq, layer.w_up, threads), hq, layer.w_up.weight_scale);

    FloatMatrix act(n, cfg.d_ffn);
    for (int i = 0; i < n; ++i) {
        const FloatVector s = swiglu(gate.row(i), up.row(i));
        std::memcpy(act.row(i).data(), s.data(), sizeof(float) * s.size());
    }

    const QuantizedActivations sq = quantize_activations(act);
    const FloatMatrix down =
        dequantize_rows(tlmm_matmul(sq, layer.w_down, threads), sq, layer.w_down.weight_scale);

    FloatMatrix out(n, cfg.d_model);
    for (int i = 0; i < n; ++i) {
        kernels::active().add_f32(h.row(i).data(), down.row(i).data(), cfg.d_model, out.row(i).data());
    }
    return out;
}

FloatVector lm_head(std::span<const float> x, const LmHeadWeights& head) {
    if (static_cast<int>(x.size()) != head.d_model) {
        throw ShapeError("lm_head: input width != d_model");
    }
    const kernels::Kernels& k = kernels::active();
    const QuantizedRow q = quantize_absmax(x, k.absmax_f32(x.data(), static_cast<int>(x.size())));

    FloatVector logits(head.vocab);
    for (int v = 0; v < head.vocab; ++v) {
        const int32_t acc = k.dot_i8i8(q.values.data(), head.col(v).data(), head.d_model);
        logits[v] = static_cast<float>(acc) * q.scale * head.scale[v];
    }
    return logits;
}

Session::Session(const ModelWeights& weights, int n_pe, int threads)
    : weights_(weights),
      rope_(RopeCache::build(weights.config.max_seq, weights.config.d_head())),
      n_pe_(n_pe),
      threads_(threads) {
    weights.config.validate();
    if (n_pe < 1 || threads < 1) {
        throw std::invalid_argument("Session: n_pe and threads must be >= 1");
    }
    caches_.reserve(weights.config.n_layers);
    for (int l = 0; l < weights.config.n_layers; ++l) {
        caches_.emplace_back(weights.config.max_seq, weights.config.n_heads, weights.config.d_head());
    }
}

FloatMatrix Session::embed(std::span<const int32_t> tokens) const {
    FloatMatrix x(static_cast<int>(tokens.size()), weights_.config.d_model);
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i] < 0 || tokens[i] >= weights_.config.vocab) {
            throw std::out_of_range("Session: token id outside vocab");
        }
        std::memcpy(x.row(static_cast<int>(i)).data(), weights_.embedding.row(tokens[i]).data(),
                    sizeof(float) * weights_.config.d_model);
    }
    return x;
}

FloatVector Session::logits_from_hidden(std::span<const float> h) {
    const RmsMaxResult r = rms_max(h, weights_.final_norm, weights_.config.rms_eps);
    return lm_head(r.normed, weights_.lm_head);
}

FloatVector Session::prefill(std::span<const int32_t> prompt) {
    if (prompt.empty()) {
        throw std::invalid_argument("Session::prefill: empty prompt");
    }
    if (seq_len_ != 0) {
        throw StateError("Session::prefill: session already holds tokens (reset first)");
    }
    if (static_cast<int>(prompt.size()) > weights_.config.max_seq) {
        throw CapacityError("Session::prefill: prompt exceeds max_seq");
    }
    FloatMatrix x = embed(prompt);
    for (int l = 0; l < weights_.config.n_layers; ++l) {
        x = forward_layer(x, weights_.layers[l], Phase::prefill, caches_[l], rope_, weights_.config,
                          n_pe_, threads_, &perf_);
    }
    seq_len_ = static_cast<int>(prompt.size());
    return logits_from_hidden(x.row(x.rows - 1));
}

FloatVector Session::decode(int32_t token) {
    if (seq_len_ >= weights_.config.max_seq) {
        throw CapacityError("Session::decode: max_seq reached");
    }
    FloatMatrix x = embed(std::span<const int32_t>(&token, 1));
    for (int l = 0; l < weights_.config.n_layers; ++l) {
        x = forward_layer(x, weights_.layers[l], Phase::decode, caches_[l], rope_, weights_.config,
                          n_pe_, threads_, &perf_);
    }
    ++seq_len_;
    return logits_from_hidden(x.row(0));
}

void Session::reset() {
    for (KvCache& c : caches_) c.reset();
    seq_len_ = 0;
    perf_ = AttnPerf{};
}

int argmax(std::span<const float> logits) {
    int best = 0;
    for (size_t i = 1; i < logits.size(); ++i) {
        if (logits[i] > logits[best]) best = static_cast<int>(i);
    }
    return best;
}

std::vector<int32_t> generate(const ModelWeights& weights, std::span<const int32_t> prompt,
                              int n_new, int n_pe, int threads, GenStats* stats) {
    if (prompt.empty()) {
        throw std::invalid_argument("generate: empty prompt");
    }
    if (n_new < 0) {
        throw std::invalid_argument("generate: n_new must be >= 0");
    }
    if (static_cast<int>(prompt.size()) + n_new > weights.config.max_seq) {
        throw CapacityError("generate: prompt + n_new exceeds max_seq");
    }

    std::vector<int32_t> out(prompt.begin(), prompt.end());
    if (stats) {
        *stats = GenStats{};
        stats->prompt_tokens = static_cast<int>(prompt.size());
    }
    if (n_new == 0) return out;

    using clock = std::chrono::steady_clock;
    Session session(weights, n_pe, threads);

    const auto t0 = clock::now();
    FloatVector logits = session.prefill(prompt);
    const auto t1 = clock::now();
    out.push_back(argmax(logits));

    for (int step = 1; step < n_new; ++step) {
        logits = session.decode(out.back());
        out.push_back(argmax(logits));
    }
    const auto t2 = clock::now();

    if (stats) {
        stats->prefill_seconds = std::chrono::duration<double>(t1 - t0).count();
        stats->decode_seconds = std::chrono::duration<double>(t2 - t1).count();
        stats->decode_steps = n_new - 1;
        stats->score_ops = session.perf().score_ops;
    }
    return out;
}

}  // namespace tllm
