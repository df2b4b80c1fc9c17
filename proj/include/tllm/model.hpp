// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "tllm/attention.hpp"
#include "tllm/core.hpp"
#include "tllm/fusion.hpp"
#include "tllm/quantizer.hpp"
#include "tllm/tlmm.hpp"

namespace tllm {

struct LayerWeights {
    PackedWeights wq, wk, wv, wo;       // d_model x d_model
    PackedWeights w_gate, w_up;         // d_model x d_ffn
    PackedWeights w_down;               // d_ffn x d_model
    RmsNormWeights rms1, rms2;

    void validate(const ModelConfig& cfg) const;
};

/// W8A8 output head: int8 weights with one dequant scale per vocab column.
/// Stored column-major (one contiguous int8 row per vocab entry).
struct LmHeadWeights {
    int d_model = 0;
    int vocab = 0;
    std::vector<int8_t> w;      // [vocab][d_model]
    std::vector<float> scale;   // per vocab column

    std::span<const int8_t> col(int v) const {
        return {w.data() + static_cast<size_t>(v) * d_model, static_cast<size_t>(d_model)};
    }
    void validate(const ModelConfig& cfg) const;
};

struct ModelWeights {
    ModelConfig config;
    TlmmParams params;
    FloatMatrix embedding;  // [vocab][d_model]
    std::vector<LayerWeights> layers;
    RmsNormWeights final_norm;
    LmHeadWeights lm_head;

    void validate() const;
};

enum class Phase { prefill, decode };

/// One decoder layer, all linear ops through the table-lookup matmul:
/// rmsnorm+max -> quant -> q/k/v proj -> dequant -> RoPE -> attention ->
/// quant -> o proj -> dequant -> residual -> rmsnorm+max -> quant ->
/// gate/up proj -> dequant -> swiglu -> quant -> down proj -> dequant ->
/// residual. Decode requires exactly one input row with the cache holding
/// the preceding positions.
FloatMatrix forward_layer(const FloatMatrix& x, const LayerWeights& layer, Phase phase,
                          KvCache& cache, const RopeCache& rope, const ModelConfig& cfg,
                          int n_pe = 8, int threads = 1, AttnPerf* perf = nullptr);

/// logits[v] = dot_int8(quantize(x), head col v) * act_scale * col_scale[v]
FloatVector lm_head(std::span<const float> x, const LmHeadWeights& head);

/// One generation session owning its per-layer KV caches.
class Session {
public:
    explicit Session(const ModelWeights& weights, int n_pe = 8, int threads = 1);

    /// Runs the prompt through all layers, filling the caches; returns the
    /// logits at the last prompt position.
    FloatVector prefill(std::span<const int32_t> prompt);

    /// One autoregressive step for `token`; returns its logits.
    FloatVector decode(int32_t token);

    void reset();
    int seq_len() const { return seq_len_; }
    const AttnPerf& perf() const { return perf_; }

private:
    FloatVector logits_from_hidden(std::span<const float> h);
    FloatMatrix embed(std::span<const int32_t> tokens) const;

    const ModelWeights& weights_;
    RopeCache rope_;
    std::vector<KvCache> caches_;
    AttnPerf perf_;
    int n_pe_;
    int threads_;
    int seq_len_ = 0;
};

struct GenStats {
    double prefill_seconds = 0.0;
    double decode_seconds = 0.0;
    int prompt_tokens = 0;
    int decode_steps = 0;
    uint64_t score_ops = 0;
};

/// Greedy generation: one prefill pass over the prompt, then decode steps.
/// Returns prompt + n_new generated token ids.
std::vector<int32_t> generate(const ModelWeights& weights, std::span<const int32_t> prompt,
                              int n_new, int n_pe = 8, int threads = 1, GenStats* stats = nullptr);

int argmax(std::span<const float> logits);

}  // namespace tllm
