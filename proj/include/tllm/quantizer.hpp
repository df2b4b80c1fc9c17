// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>

#include "tllm/core.hpp"

namespace tllm {

struct RmsNormWeights {
    FloatVector gamma;
};

struct RmsMaxResult {
    FloatVector normed;
    float absmax = 0.0f;
};

/// RMS normalization fused with channel-max extraction:
///   normed[i] = gamma[i] * x[i] / sqrt(mean(x^2) + eps)
/// The mean-square reduction is accumulated in 32-bit float; absmax is the
/// maximum |normed[i]| for the following ABSMAX quantization.
RmsMaxResult rms_max(std::span<const float> x, const RmsNormWeights& gamma, float eps);

struct QuantizedRow {
    std::vector<int8_t> values;
    float scale = 1.0f;
};

float absmax_of(std::span<const float> x);

/// Symmetric int8 quantization: scale = absmax/127 (1 when absmax == 0),
/// values = clamp(round_half_away_from_zero(x/scale), -127, +127).
/// The caller supplies absmax (>= max|x|) from rms_max or a prior max pass.
QuantizedRow quantize_absmax(std::span<const float> x, float absmax);

/// out[j] = o[j] * act_scale * weight_scale
FloatVector dequantize(std::span<const int32_t> o, float act_scale, float weight_scale);

/// Per-row absmax quantization of a whole activation matrix.
QuantizedActivations quantize_activations(const FloatMatrix& x);

}  // namespace tllm
