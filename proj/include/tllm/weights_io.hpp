// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tllm/model.hpp"

namespace tllm {

/// Absmean ternarization: scale = mean(|w|) (1 when w == 0), trit =
/// clamp(round(w/scale), -1, +1).
struct ScaledTernary {
    TernaryMatrix w;
    float scale = 1.0f;
};

ScaledTernary ternarize(const FloatMatrix& w);

struct UnpackedLayer {
    ScaledTernary wq, wk, wv, wo;  // d_model x d_model
    ScaledTernary w_gate, w_up;    // d_model x d_ffn
    ScaledTernary w_down;          // d_ffn x d_model
    RmsNormWeights rms1, rms2;
};

/// Logical (unpermuted, unencoded) model weights; the packer's input.
struct UnpackedModel {
    ModelConfig config;
    FloatMatrix embedding;  // [vocab][d_model]
    std::vector<UnpackedLayer> layers;
    RmsNormWeights final_norm;
    FloatMatrix lm_head;    // [d_model][vocab], quantized per column at pack time
};

/// Deterministic random model: Gaussian floats ternarized with absmean
/// scaling (per-matrix scale = mean |w| before ternarization).
UnpackedModel make_toy_model(const ModelConfig& config, uint64_t seed);

enum class SectionKind : uint16_t {
    embedding = 0,
    rms1 = 1,
    rms2 = 2,
    final_norm = 3,
    lm_head_w = 4,
    lm_head_scale = 5,
    wq = 6,
    wk = 7,
    wv = 8,
    wo = 9,
    w_gate = 10,
    w_up = 11,
    w_down = 12,
};

bool is_packed_kind(SectionKind kind);
const char* section_kind_name(SectionKind kind);

struct SectionDesc {
    SectionKind kind{};
    uint16_t layer = 0xffff;  // 0xffff for model-level sections
    uint32_t rows = 0;        // logical
    uint32_t cols = 0;
    uint32_t padded_rows = 0;  // packed sections only
    float scale = 0.0f;        // weight_scale for packed sections
    uint64_t offset = 0;
    uint64_t size = 0;
};

struct FileInfo {
    ModelConfig config;
    TlmmParams params;
    int b_idx = 0;
    std::vector<SectionDesc> sections;
    size_t total_bytes = 0;
};

/// Serializes the model: header, section table, then payloads. The q/k
/// projections are column-permuted for consecutive-pair RoPE before
/// encoding, and RMSNorm weights sit adjacent to their layer's packed
/// matrices. Byte-deterministic for identical inputs.
std::vector<uint8_t> pack_model(const UnpackedModel& model, const TlmmParams& params);

/// Parses and validates the header and section table only.
FileInfo inspect_file(std::span<const uint8_t> bytes);

/// Full load with validation: magic/version, dimension consistency,
/// b_idx == ceil(log2 3^g), section bounds, every packed-weight invariant
/// (index < 3^g, zero padding groups). Throws FormatError with the failing
/// location.
ModelWeights load_model(std::span<const uint8_t> bytes);

std::vector<uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const uint8_t> bytes);

}  // namespace tllm
