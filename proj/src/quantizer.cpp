// SPDX-License-Identifier: Apache-2.0
#include "tllm/quantizer.hpp"

#include <cmath>

#include "tllm/kernels.hpp"

namespace tllm {

RmsMaxResult rms_max(std::span<const float> x, const RmsNormWeights& gamma, float eps) {
    if (x.size() != gamma.gamma.size()) {
        throw ShapeError("rms_max: gamma length != input length");
    }
    if (!(eps > 0.0f)) {
        throw std::invalid_argument("rms_max: eps must be positive");
    }
    for (float v : x) {
        if (!std::isfinite(v)) throw NumericError("rms_max: non-finite input");
    }
    const kernels::Kernels& k = kernels::active();
    const int n = static_cast<int>(x.size());

    const float mean_sq = k.sum_squares_f32(x.data(), n) / static_cast<float>(n);
    const float inv_rms = 1.0f / std::sqrt(mean_sq + eps);

    RmsMaxResult r;
    r.normed.resize(n);
    for (int i = 0; i < n; ++i) {
        r.normed[i] = gamma.gamma[i] * x[i] * inv_rms;
    }
    r.absmax = k.absmax_f32(r.normed.data(), n);
    return r;
}

float absmax_of(std::span<const float> x) {
    return kernels::active().absmax_f32(x.data(), static_cast<int>(x.size()));
}

QuantizedRow quantize_absmax(std::span<const float> x, float absmax) {
    QuantizedRow q;
    q.scale = absmax > 0.0f ? absmax / 127.0f : 1.0f;
    q.values.resize(x.size());
    kernels::active().quantize_i8(x.data(), static_cast<int>(x.size()), q.scale, q.values.data());
    return q;
}

FloatVector dequantize(std::span<const int32_t> o, float act_scale, float weight_scale) {
    if (!(act_scale > 0.0f) || !(weight_scale > 0.0f)) {
        throw std::invalid_argument("dequantize: scales must be positive");
    }
    FloatVector out(o.size());
    kernels::active().scale_f32(o.data(), static_cast<int>(o.size()), act_scale * weight_scale,
                                out.data());
    return out;
}

QuantizedActivations quantize_activations(const FloatMatrix& x) {
    QuantizedActivations q(x.rows, x.cols);
    const kernels::Kernels& k = kernels::active();
    for (int i = 0; i < x.rows; ++i) {
        const float* row = x.v.data() + static_cast<size_t>(i) * x.cols;
        const float amax = k.absmax_f32(row, x.cols);
        q.row_scale[i] = amax > 0.0f ? amax / 127.0f : 1.0f;
        k.quantize_i8(row, x.cols, q.row_scale[i], q.row(i).data());
    }
    return q;
}

}  // namespace tllm
