// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "testing.hpp"
#include "tllm/bitpack.hpp"
#include "tllm/tlmm.hpp"

using namespace tllm;

namespace {

// base-3 positional arithmetic oracle, written independently of encode_group
uint32_t base3_oracle(std::span<const int8_t> trits) {
    uint32_t v = 0;
    for (int i = static_cast<int>(trits.size()) - 1; i >= 0; --i) {
        v = v * 3 + static_cast<uint32_t>(trits[i] + 1);
    }
    return v;
}

}  // namespace

TEST_SUITE_BEGIN("tlmm");

TEST_CASE("params constants") {
    TlmmParams p{3, 28, 16};
    CHECK(p.n_tb() == 27);
    CHECK(p.b_idx() == 5);
    CHECK(p.b_tb() == 10);  // 8 + ceil(log2 3)
    CHECK(p.ivec_bits() == 140);
    CHECK(p.ivec_bytes() == 18);
    CHECK(zero_group_index(3) == 13);
    CHECK(partial_table_entries(3) == 13);

    CHECK(TlmmParams{2, 1, 1}.b_idx() == 4);
    CHECK(TlmmParams{4, 1, 1}.b_idx() == 7);
    CHECK_THROWS(TlmmParams{0, 1, 1}.validate());
    CHECK_THROWS(TlmmParams{17, 1, 1}.validate());
    CHECK_THROWS(TlmmParams{3, 0, 1}.validate());
}

TEST_CASE("group encoding: hand values and oracle") {
    const int8_t zeros[3] = {0, 0, 0};
    CHECK(encode_group({zeros, 3}) == 13);  // digits (1,1,1) = 1 + 3 + 9

    const int8_t ones[3] = {1, 1, 1};
    CHECK(encode_group({ones, 3}) == 26);  // 2 + 6 + 18 = n_tb - 1

    tt::Rng rng(21);
    std::uniform_int_distribution<int> trit(-1, 1);
    for (int iter = 0; iter < 200; ++iter) {
        const int g = 1 + static_cast<int>(rng() % 6);
        std::vector<int8_t> trits(g);
        for (auto& t : trits) t = static_cast<int8_t>(trit(rng));
        const uint32_t idx = encode_group(trits);
        CHECK(idx == base3_oracle(trits));
        std::vector<int8_t> back(g);
        decode_group(idx, g, back.data());
        CHECK(back == trits);
    }
}

TEST_CASE("encode/decode round-trip over random shapes and params") {
    tt::Rng rng(22);
    for (int iter = 0; iter < 100; ++iter) {
        const int g = 2 + static_cast<int>(rng() % 3);
        const int t = 1 + static_cast<int>(rng() % 6);
        const int q = 1 + static_cast<int>(rng() % 4);
        const int rows = 1 + static_cast<int>(rng() % 60);
        const int cols = 1 + static_cast<int>(rng() % 20);
        const TernaryMatrix w = tt::random_ternary(rng, rows, cols);
        const PackedWeights pw = encode_weights(w, TlmmParams{g, t, q});
        CHECK(pw.padded_rows % (t * g) == 0);
        CHECK(pw.padded_rows - rows < t * g);
        const TernaryMatrix back = decode_weights(pw);
        CHECK(back.rows == w.rows);
        CHECK(back.cols == w.cols);
        CHECK(back.t == w.t);
    }
}

TEST_CASE("index vectors pack little-endian") {
    // two tables, g=3: first index in the low 5 bits
    TernaryMatrix w(6, 1);
    w.at(0, 0) = 1;
    w.at(1, 0) = 1;
    w.at(2, 0) = 1;  // group 0: index 26
    // rows 3..5 zero: group 1: index 13
    const PackedWeights pw = encode_weights(w, TlmmParams{3, 2, 1});
    const uint8_t* iv = pw.ivec(0, 0);
    CHECK(read_bits(iv, 0, 5) == 26);
    CHECK(read_bits(iv, 5, 5) == 13);
    CHECK((iv[0] & 0x1f) == 26);  // byte-level: low five bits
}

TEST_CASE("build_table: hand entries and defining equation") {
    const TlmmParams p{3, 1, 1};
    const int8_t act[3] = {10, 20, 30};
    const LookupTable tb = build_table({act, 3}, p);
    REQUIRE(tb.entries.size() == 27);

    // trits (+1,-1,0): digits (2,0,1) -> 2 + 0*3 + 1*9 = 11
    CHECK(tb.entries[11] == 10 - 20);
    CHECK(tb.entries[13] == 0);  // all-zero group

    const int8_t maxed[3] = {127, 127, 127};
    const LookupTable tb2 = build_table({maxed, 3}, p);
    CHECK(tb2.entries[26] == 381);  // fits the 10-bit signed b_tb bound
    CHECK(381 < (1 << (p.b_tb() - 1)));

    // defining equation across every entry
    std::vector<int8_t> trits(3);
    for (uint32_t e = 0; e < 27; ++e) {
        decode_group(e, 3, trits.data());
        int32_t dot = 0;
        for (int d = 0; d < 3; ++d) dot += trits[d] * act[d];
        CHECK(tb.entries[e] == dot);
    }
}

TEST_CASE("matmul equals naive oracle (spec instance)") {
    tt::Rng rng(23);
    const QuantizedActivations a = tt::random_activations(rng, 8, 48);
    const TernaryMatrix w = tt::random_ternary(rng, 48, 16);
    const PackedWeights pw = encode_weights(w, TlmmParams{3, 4, 2});
    const Int32Matrix ref = ternary_matmul_naive(a, w);
    CHECK(tlmm_matmul(a, pw).v == ref.v);
    CHECK(tlmm_matmul_partial_table(a, pw).v == ref.v);
}

TEST_CASE("matmul: zero activations, padding, randomized equivalence") {
    tt::Rng rng(24);

    {
        const QuantizedActivations a(3, 48);  // all zero
        const PackedWeights pw = encode_weights(tt::random_ternary(rng, 48, 9), TlmmParams{3, 4, 2});
        for (int32_t x : tlmm_matmul(a, pw).v) CHECK(x == 0);
    }
    {
        // n = 47, not a multiple of t*g = 12
        const QuantizedActivations a = tt::random_activations(rng, 5, 47);
        const TernaryMatrix w = tt::random_ternary(rng, 47, 11);
        const PackedWeights pw = encode_weights(w, TlmmParams{3, 4, 2});
        CHECK(pw.padded_rows == 48);
        CHECK(tlmm_matmul(a, pw).v == ternary_matmul_naive(a, w).v);
    }

    for (int iter = 0; iter < 60; ++iter) {
        const int g = 2 + static_cast<int>(rng() % 3);
        const int t = 1 + static_cast<int>(rng() % 5);
        const int q = 1 + static_cast<int>(rng() % 17);
        const int m = 1 + static_cast<int>(rng() % 6);
        const int n = 1 + static_cast<int>(rng() % 96);
        const int k = 1 + static_cast<int>(rng() % 96);
        const QuantizedActivations a = tt::random_activations(rng, m, n);
        const TernaryMatrix w = tt::random_ternary(rng, n, k);
        const PackedWeights pw = encode_weights(w, TlmmParams{g, t, q});
        const Int32Matrix ref = ternary_matmul_naive(a, w);
        CHECK(tlmm_matmul(a, pw).v == ref.v);
        CHECK(tlmm_matmul_partial_table(a, pw).v == ref.v);
    }
}

TEST_CASE("tiling invariance: output independent of t and q") {
    tt::Rng rng(25);
    const QuantizedActivations a = tt::random_activations(rng, 4, 52);
    const TernaryMatrix w = tt::random_ternary(rng, 52, 23);
    const Int32Matrix ref = ternary_matmul_naive(a, w);
    for (int t : {1, 2, 4, 28}) {
        for (int q : {1, 2, 16}) {
            const PackedWeights pw = encode_weights(w, TlmmParams{3, t, q});
            CHECK(tlmm_matmul(a, pw).v == ref.v);
        }
    }
}

TEST_CASE("row-parallel execution is exact") {
    tt::Rng rng(26);
    const QuantizedActivations a = tt::random_activations(rng, 13, 40);
    const TernaryMatrix w = tt::random_ternary(rng, 40, 17);
    const PackedWeights pw = encode_weights(w, TlmmParams{3, 2, 4});
    const Int32Matrix one = tlmm_matmul(a, pw, 1);
    const Int32Matrix four = tlmm_matmul(a, pw, 4);
    CHECK(one.v == four.v);
}

TEST_CASE("partial method: all-zero weights use the reserved zero state") {
    tt::Rng rng(27);
    const QuantizedActivations a = tt::random_activations(rng, 2, 24);
    const TernaryMatrix w(24, 6);  // all zero trits
    const PackedWeights pw = encode_weights(w, TlmmParams{3, 2, 2});
    for (int32_t x : tlmm_matmul_partial_table(a, pw).v) CHECK(x == 0);
}

TEST_CASE("shape errors") {
    tt::Rng rng(28);
    const QuantizedActivations a = tt::random_activations(rng, 2, 10);
    const PackedWeights pw = encode_weights(tt::random_ternary(rng, 12, 4), TlmmParams{3, 1, 1});
    CHECK_THROWS_AS(tlmm_matmul(a, pw), ShapeError);
    CHECK_THROWS_AS(tlmm_matmul_partial_table(a, pw), ShapeError);
    CHECK_THROWS_AS(build_table(std::span<const int8_t>{}, TlmmParams{3, 1, 1}), ShapeError);
}

TEST_CASE("packed validation rejects out-of-range indices and bad padding") {
    tt::Rng rng(29);
    const TernaryMatrix w = tt::random_ternary(rng, 10, 3);
    PackedWeights pw = encode_weights(w, TlmmParams{3, 2, 1});
    CHECK_NOTHROW(pw.validate());

    PackedWeights corrupt = pw;
    // overwrite the first 5-bit index with 31 (>= 27)
    write_bits(corrupt.ivec(0, 0), 0, 5, 31);
    CHECK_THROWS_AS(corrupt.validate(), FormatError);

    PackedWeights badpad = pw;
    // rows 10..11 are padding in the last group; force a nonzero trit there
    const int8_t trits[3] = {0, 1, 0};  // covers rows 9,10,11 -> nonzero at 10
    write_bits(badpad.ivec(1, 0), 5, 5, encode_group({trits, 3}));
    CHECK_THROWS_AS(badpad.validate(), FormatError);
}

TEST_SUITE_END();
