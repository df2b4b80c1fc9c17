// SPDX-License-Identifier: Apache-2.0
#include "tllm/tlmm.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>
#include <thread>

#include "tllm/bitpack.hpp"
#include "tllm/kernels.hpp"

namespace tllm {

namespace {
constexpr int kIndexSlackBytes = 8;  // read_bits/write_bits window slack
constexpr int kMaxRowsExact = 1 << 24;  // int32 accumulation safe bound

int ceil_log2(int64_t x) {
    return x <= 1 ? 0 : std::bit_width(static_cast<uint64_t>(x - 1));
}
}  // namespace

int64_t pow3(int g) {
    int64_t p = 1;
    for (int i = 0; i < g; ++i) p *= 3;
    return p;
}

int TlmmParams::b_idx() const { return ceil_log2(pow3(g)); }

int TlmmParams::b_tb() const { return 8 + ceil_log2(g); }

void TlmmParams::validate() const {
    if (g < 1 || g > 16) {
        throw std::invalid_argument("TlmmParams: g must be in [1,16]");
    }
    if (t < 1 || q < 1) {
        throw std::invalid_argument("TlmmParams: t and q must be >= 1");
    }
}

uint32_t encode_group(std::span<const int8_t> trits) {
    uint32_t index = 0;
    uint32_t weight = 1;
    for (int8_t trit : trits) {
        index += static_cast<uint32_t>(trit + 1) * weight;
        weight *= 3;
    }
    return index;
}

void decode_group(uint32_t index, int g, int8_t* trits_out) {
    for (int i = 0; i < g; ++i) {
        trits_out[i] = static_cast<int8_t>(index % 3) - 1;
        index /= 3;
    }
}

uint32_t zero_group_index(int g) { return static_cast<uint32_t>((pow3(g) - 1) / 2); }

PackedWeights encode_weights(const TernaryMatrix& w, const TlmmParams& params, float weight_scale) {
    params.validate();
    w.validate();
    if (!(weight_scale > 0.0f) || !std::isfinite(weight_scale)) {
        throw std::invalid_argument("encode_weights: weight_scale must be positive and finite");
    }
    if (w.rows > kMaxRowsExact) {
        throw ShapeError("encode_weights: input dimension too large for exact int32 accumulation");
    }

    const int stride = params.group_stride();
    PackedWeights pw;
    pw.logical_rows = w.rows;
    pw.logical_cols = w.cols;
    pw.padded_rows = (w.rows + stride - 1) / stride * stride;
    pw.weight_scale = weight_scale;
    pw.params = params;
    pw.ivec_bytes = params.ivec_bytes();
    pw.indices.assign(pw.payload_bytes() + kIndexSlackBytes, 0);

    const int b = params.b_idx();
    std::vector<int8_t> group(params.g);
    for (int br = 0; br < pw.block_rows(); ++br) {
        for (int col = 0; col < w.cols; ++col) {
            uint8_t* iv = pw.ivec(br, col);
            for (int ti = 0; ti < params.t; ++ti) {
                const int base_row = br * stride + ti * params.g;
                for (int d = 0; d < params.g; ++d) {
                    const int row = base_row + d;
                    group[d] = row < w.rows ? w.at(row, col) : int8_t{0};
                }
                write_bits(iv, static_cast<size_t>(ti) * b, b, encode_group(group));
            }
        }
    }
    return pw;
}

void PackedWeights::validate() const {
    params.validate();
    if (logical_rows < 1 || logical_cols < 1) {
        throw FormatError("PackedWeights: dimensions must be >= 1");
    }
    const int stride = params.group_stride();
    if (padded_rows < logical_rows || padded_rows % stride != 0 ||
        padded_rows - logical_rows >= stride) {
        throw FormatError("PackedWeights: padded_rows is not the next multiple of t*g");
    }
    if (ivec_bytes != params.ivec_bytes()) {
        throw FormatError("PackedWeights: index-vector byte width mismatch");
    }
    if (!(weight_scale > 0.0f) || !std::isfinite(weight_scale)) {
        throw FormatError("PackedWeights: weight_scale must be positive and finite");
    }
    if (indices.size() < payload_bytes() + kIndexSlackBytes - 1) {
        throw FormatError("PackedWeights: index storage truncated");
    }

    const int b = params.b_idx();
    const uint32_t n_tb = static_cast<uint32_t>(params.n_tb());
    const uint32_t zero_idx = zero_group_index(params.g);
    std::vector<int8_t> group(params.g);
    for (int br = 0; br < block_rows(); ++br) {
        for (int col = 0; col < logical_cols; ++col) {
            const uint8_t* iv = ivec(br, col);
            for (int ti = 0; ti < params.t; ++ti) {
                const uint32_t idx = read_bits(iv, static_cast<size_t>(ti) * b, b);
                if (idx >= n_tb) {
                    std::ostringstream msg;
                    msg << "PackedWeights: index " << idx << " >= " << n_tb << " at block_row " << br
                        << ", col " << col << ", table " << ti;
                    throw FormatError(msg.str());
                }
                const int base_row = br * stride + ti * params.g;
                if (base_row + params.g > logical_rows) {
                    // group covers padding lanes; those trits must be zero
                    if (base_row >= logical_rows) {
                        if (idx != zero_idx) {
                            throw FormatError("PackedWeights: padding group is not the all-zero group");
                        }
                    } else {
                        decode_group(idx, params.g, group.data());
                        for (int d = 0; d < params.g; ++d) {
                            if (base_row + d >= logical_rows && group[d] != 0) {
                                throw FormatError("PackedWeights: nonzero trit in padding lane");
                            }
                        }
                    }
                }
            }
        }
    }
}

TernaryMatrix decode_weights(const PackedWeights& pw) {
    pw.validate();
    const int b = pw.params.b_idx();
    const int stride = pw.params.group_stride();
    TernaryMatrix w(pw.logical_rows, pw.logical_cols);
    std::vector<int8_t> group(pw.params.g);
    for (int br = 0; br < pw.block_rows(); ++br) {
        for (int col = 0; col < pw.logical_cols; ++col) {
            const uint8_t* iv = pw.ivec(br, col);
            for (int ti = 0; ti < pw.params.t; ++ti) {
                decode_group(read_bits(iv, static_cast<size_t>(ti) * b, b), pw.params.g, group.data());
                const int base_row = br * stride + ti * pw.params.g;
                for (int d = 0; d < pw.params.g && base_row + d < pw.logical_rows; ++d) {
                    w.at(base_row + d, col) = group[d];
                }
            }
        }
    }
    return w;
}

LookupTable build_table(std::span<const int8_t> activation_group, const TlmmParams& params) {
    params.validate();
    if (static_cast<int>(activation_group.size()) != params.g) {
        throw ShapeError("build_table: activation group length != g");
    }
    const int n_tb = static_cast<int>(params.n_tb());
    std::vector<int32_t> scratch(n_tb);
    kernels::active().build_tables(activation_group.data(), params.g, 1, n_tb, scratch.data());

    LookupTable table;
    table.g = params.g;
    table.entries.resize(n_tb);
    for (int e = 0; e < n_tb; ++e) {
        table.entries[e] = static_cast<int16_t>(scratch[e]);  // |entry| <= 127*g <= 2032
    }
    return table;
}

namespace {

void check_matmul_shapes(const QuantizedActivations& a, const PackedWeights& pw) {
    if (a.rows < 1 || a.cols < 1) {
        throw ShapeError("tlmm_matmul: empty activation matrix");
    }
    if (a.cols != pw.logical_rows) {
        throw ShapeError("tlmm_matmul: a.cols != packed logical_rows");
    }
}

// Zero-extends the activation slice covering padding lanes of the last block.
void load_act_slice(const QuantizedActivations& a, int row, int base, int stride, int8_t* buf) {
    const int take = std::min(stride, a.cols - base);
    std::memcpy(buf, a.values.data() + static_cast<size_t>(row) * a.cols + base, take);
    if (take < stride) std::memset(buf + take, 0, stride - take);
}

void tlmm_rows(const QuantizedActivations& a, const PackedWeights& pw, const kernels::Kernels& k,
               int row_begin, int row_end, Int32Matrix& out) {
    const TlmmParams& p = pw.params;
    const int stride = p.group_stride();
    const int n_tb = static_cast<int>(p.n_tb());
    const int b = p.b_idx();
    const int cols = pw.logical_cols;

    std::vector<int8_t> act(stride);
    std::vector<int32_t> tables(static_cast<size_t>(p.t) * n_tb);

    for (int i = row_begin; i < row_end; ++i) {
        int32_t* orow = out.v.data() + static_cast<size_t>(i) * cols;
        for (int br = 0; br < pw.block_rows(); ++br) {
            load_act_slice(a, i, br * stride, stride, act.data());
            k.build_tables(act.data(), p.g, p.t, n_tb, tables.data());
            // q-wide sweep over the output columns
            for (int j0 = 0; j0 < cols; j0 += p.q) {
                const int nc = std::min(p.q, cols - j0);
                k.lookup_accumulate(tables.data(), n_tb, p.t, b, pw.ivec(br, j0), pw.ivec_bytes, nc,
                                    orow + j0);
            }
        }
    }
}

}  // namespace

Int32Matrix tlmm_matmul(const QuantizedActivations& a, const PackedWeights& pw, int threads) {
    check_matmul_shapes(a, pw);
    const kernels::Kernels& k = kernels::active();
    Int32Matrix out(a.rows, pw.logical_cols);

    const int n_threads = std::max(1, std::min(threads, a.rows));
    if (n_threads == 1) {
        tlmm_rows(a, pw, k, 0, a.rows, out);
        return out;
    }
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    const int chunk = (a.rows + n_threads - 1) / n_threads;
    for (int ti = 0; ti < n_threads; ++ti) {
        const int lo = ti * chunk;
        const int hi = std::min(a.rows, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&, lo, hi] { tlmm_rows(a, pw, k, lo, hi, out); });
    }
    for (auto& th : pool) th.join();
    return out;
}

int64_t partial_table_entries(int g) { return (pow3(g) - 1) / 2; }

Int32Matrix tlmm_matmul_partial_table(const QuantizedActivations& a, const PackedWeights& pw) {
    check_matmul_shapes(a, pw);
    const TlmmParams& p = pw.params;
    const int stride = p.group_stride();
    const int b = p.b_idx();
    const int cols = pw.logical_cols;
    const int n_pos = static_cast<int>(partial_table_entries(p.g));
    const int32_t zero_idx = static_cast<int32_t>(zero_group_index(p.g));

    Int32Matrix out(a.rows, cols);
    std::vector<int8_t> act(stride);
    // positive-group tables only: pos[t][s-1] for signed group value s in [1, n_pos]
    std::vector<int32_t> pos(static_cast<size_t>(p.t) * n_pos);

    for (int i = 0; i < a.rows; ++i) {
        int32_t* orow = out.v.data() + static_cast<size_t>(i) * cols;
        for (int br = 0; br < pw.block_rows(); ++br) {
            load_act_slice(a, i, br * stride, stride, act.data());
            for (int t = 0; t < p.t; ++t) {
                int32_t* tb = pos.data() + static_cast<size_t>(t) * n_pos;
                const int8_t* ag = act.data() + static_cast<size_t>(t) * p.g;
                for (int s = 1; s <= n_pos; ++s) {
                    // balanced-ternary digits of s give the positive group
                    int32_t sum = 0;
                    int r = s;
                    for (int d = 0; d < p.g; ++d) {
                        const int digit = r % 3;
                        if (digit == 2) {
                            sum -= ag[d];
                            r = (r + 1) / 3;
                        } else {
                            sum += digit * ag[d];
                            r /= 3;
                        }
                    }
                    tb[s - 1] = sum;
                }
            }
            for (int j = 0; j < cols; ++j) {
                const uint8_t* iv = pw.ivec(br, j);
                int32_t sum = 0;
                size_t bitpos = 0;
                for (int t = 0; t < p.t; ++t, bitpos += b) {
                    const int32_t rel =
                        static_cast<int32_t>(read_bits(iv, bitpos, b)) - zero_idx;
                    const int32_t* tb = pos.data() + static_cast<size_t>(t) * n_pos;
                    if (rel > 0) {
                        sum += tb[rel - 1];
                    } else if (rel < 0) {
                        sum -= tb[-rel - 1];  // negative index: invert the stored value
                    }
                    // rel == 0: reserved all-zero state contributes nothing
                }
                orow[j] += sum;
            }
        }
    }
    return out;
}

}  // namespace tllm
