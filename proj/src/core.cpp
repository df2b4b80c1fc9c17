// SPDX-License-Identifier: Apache-2.0
#include "tllm/core.hpp"

namespace tllm {

TernaryMatrix::TernaryMatrix(int rows_, int cols_)
    : rows(rows_), cols(cols_), t(static_cast<size_t>(rows_) * cols_, 0) {
    if (rows_ < 1 || cols_ < 1) {
        throw ShapeError("TernaryMatrix: rows and cols must be >= 1");
    }
}

void TernaryMatrix::validate() const {
    if (rows < 1 || cols < 1) {
        throw ShapeError("TernaryMatrix: rows and cols must be >= 1");
    }
    if (t.size() != static_cast<size_t>(rows) * cols) {
        throw ShapeError("TernaryMatrix: storage size does not match shape");
    }
    for (int8_t x : t) {
        if (x < -1 || x > 1) {
            throw std::invalid_argument("TernaryMatrix: element outside {-1,0,+1}");
        }
    }
}

void ModelConfig::validate() const {
    if (d_model < 1 || d_ffn < 1 || n_layers < 1 || n_heads < 1 || max_seq < 1 || vocab < 1) {
        throw ShapeError("ModelConfig: all dimensions must be >= 1");
    }
    if (d_model % n_heads != 0) {
        throw ShapeError("ModelConfig: d_model must be divisible by n_heads");
    }
    if (d_head() % 2 != 0) {
        throw ShapeError("ModelConfig: d_head must be even (RoPE pairs elements)");
    }
    if (rms_eps <= 0.0f) {
        throw std::invalid_argument("ModelConfig: rms_eps must be positive");
    }
}

Int32Matrix ternary_matmul_naive(const QuantizedActivations& a, const TernaryMatrix& w) {
    if (a.cols != w.rows) {
        throw ShapeError("ternary_matmul_naive: a.cols != w.rows");
    }
    Int32Matrix out(a.rows, w.cols);
    for (int i = 0; i < a.rows; ++i) {
        const int8_t* arow = a.values.data() + static_cast<size_t>(i) * a.cols;
        int32_t* orow = out.v.data() + static_cast<size_t>(i) * w.cols;
        for (int t = 0; t < w.rows; ++t) {
            const int32_t av = arow[t];
            if (av == 0) continue;
            const int8_t* wrow = w.t.data() + static_cast<size_t>(t) * w.cols;
            for (int j = 0; j < w.cols; ++j) {
                // pass / negate / zero
                const int8_t trit = wrow[j];
                if (trit == 1) {
                    orow[j] += av;
                } else if (trit == -1) {
                    orow[j] -= av;
                }
            }
        }
    }
    return out;
}

}  // namespace tllm
