// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tllm {

/// Dimension or layout mismatch between operands.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Sequence capacity (max_seq / KV cache) exceeded.
struct CapacityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Operation invoked on an object in the wrong state (e.g. empty KV cache).
struct StateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Non-finite value where finite input is required.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed or corrupt weight file.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Dense ternary weight matrix W in {-1,0,+1}^(rows x cols), row-major.
/// rows = input features (n), cols = output features (k).
struct TernaryMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<int8_t> t;

    TernaryMatrix() = default;
    TernaryMatrix(int rows_, int cols_);

    int8_t at(int r, int c) const { return t[static_cast<size_t>(r) * cols + c]; }
    int8_t& at(int r, int c) { return t[static_cast<size_t>(r) * cols + c]; }

    /// Throws ShapeError / std::invalid_argument if empty or any element
    /// is outside {-1,0,+1}.
    void validate() const;
};

struct FloatMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<float> v;

    FloatMatrix() = default;
    FloatMatrix(int rows_, int cols_) : rows(rows_), cols(cols_), v(static_cast<size_t>(rows_) * cols_, 0.0f) {}

    float at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
    float& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    std::span<float> row(int r) { return {v.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)}; }
    std::span<const float> row(int r) const {
        return {v.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)};
    }
};

using FloatVector = std::vector<float>;

/// ABSMAX-quantized activation rows: int8 values with one scale per row.
/// Scale is absmax/127, or 1 for an all-zero row.
struct QuantizedActivations {
    int rows = 0;
    int cols = 0;
    std::vector<int8_t> values;
    std::vector<float> row_scale;

    QuantizedActivations() = default;
    QuantizedActivations(int rows_, int cols_)
        : rows(rows_), cols(cols_), values(static_cast<size_t>(rows_) * cols_, 0), row_scale(rows_, 1.0f) {}

    std::span<const int8_t> row(int r) const {
        return {values.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)};
    }
    std::span<int8_t> row(int r) {
        return {values.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)};
    }
};

/// Int32 accumulator matrix; each row is one output vector o of a
/// ternary matmul (exact int8 x trit dot products).
struct Int32Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<int32_t> v;

    Int32Matrix() = default;
    Int32Matrix(int rows_, int cols_) : rows(rows_), cols(cols_), v(static_cast<size_t>(rows_) * cols_, 0) {}

    int32_t at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
    int32_t& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    std::span<const int32_t> row(int r) const {
        return {v.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)};
    }
};

struct ModelConfig {
    int d_model = 0;
    int d_ffn = 0;
    int n_layers = 0;
    int n_heads = 0;
    int max_seq = 0;
    int vocab = 0;
    float rms_eps = 1e-5f;

    int d_head() const { return d_model / n_heads; }

    /// d_model divisible by n_heads, d_head even (RoPE pairing), all counts >= 1.
    void validate() const;
};

/// Reference ternary matmul: per-element pass/negate/zero selection.
/// out[i][j] = sum_t a[i][t] * w[t][j], exact int32.
///
/// This is the correctness oracle for the table-lookup engine; it stays a
/// plain scalar loop on purpose.
Int32Matrix ternary_matmul_naive(const QuantizedActivations& a, const TernaryMatrix& w);

}  // namespace tllm
