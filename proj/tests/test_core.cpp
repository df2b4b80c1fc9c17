// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "testing.hpp"
#include "tllm/core.hpp"

using namespace tllm;

TEST_SUITE_BEGIN("core");

TEST_CASE("naive matmul: hand dot-product") {
    QuantizedActivations a(1, 2);
    a.values = {5, -3};
    TernaryMatrix w(2, 1);
    w.at(0, 0) = 1;
    w.at(1, 0) = -1;
    const Int32Matrix out = ternary_matmul_naive(a, w);
    CHECK(out.at(0, 0) == 8);
}

TEST_CASE("naive matmul: all-zero weights annihilate") {
    tt::Rng rng(1);
    const QuantizedActivations a = tt::random_activations(rng, 3, 16);
    const TernaryMatrix w(16, 5);  // zero-initialized
    const Int32Matrix out = ternary_matmul_naive(a, w);
    for (int32_t x : out.v) CHECK(x == 0);
}

TEST_CASE("naive matmul: identity passes through") {
    QuantizedActivations a(1, 8);
    for (int i = 0; i < 8; ++i) a.values[i] = static_cast<int8_t>(i + 1);
    TernaryMatrix w(8, 8);
    for (int i = 0; i < 8; ++i) w.at(i, i) = 1;
    const Int32Matrix out = ternary_matmul_naive(a, w);
    for (int i = 0; i < 8; ++i) CHECK(out.at(0, i) == i + 1);
}

TEST_CASE("naive matmul: linear in activations") {
    tt::Rng rng(2);
    for (int iter = 0; iter < 20; ++iter) {
        const int n = 1 + static_cast<int>(rng() % 24);
        const int k = 1 + static_cast<int>(rng() % 12);
        // halves keep the element-wise sum within int8 range
        const QuantizedActivations a1 = tt::random_activations(rng, 2, n, -63, 63);
        const QuantizedActivations a2 = tt::random_activations(rng, 2, n, -63, 63);
        QuantizedActivations sum(2, n);
        for (size_t i = 0; i < sum.values.size(); ++i) {
            sum.values[i] = static_cast<int8_t>(a1.values[i] + a2.values[i]);
        }
        const TernaryMatrix w = tt::random_ternary(rng, n, k);
        const Int32Matrix o1 = ternary_matmul_naive(a1, w);
        const Int32Matrix o2 = ternary_matmul_naive(a2, w);
        const Int32Matrix os = ternary_matmul_naive(sum, w);
        for (size_t i = 0; i < os.v.size(); ++i) CHECK(os.v[i] == o1.v[i] + o2.v[i]);
    }
}

TEST_CASE("naive matmul: trit negation negates output") {
    tt::Rng rng(3);
    const QuantizedActivations a = tt::random_activations(rng, 4, 20);
    const TernaryMatrix w = tt::random_ternary(rng, 20, 7);
    TernaryMatrix neg = w;
    for (auto& x : neg.t) x = static_cast<int8_t>(-x);
    const Int32Matrix o = ternary_matmul_naive(a, w);
    const Int32Matrix on = ternary_matmul_naive(a, neg);
    for (size_t i = 0; i < o.v.size(); ++i) CHECK(on.v[i] == -o.v[i]);
}

TEST_CASE("naive matmul: dimension mismatch") {
    const QuantizedActivations a(1, 4);
    const TernaryMatrix w(5, 2);
    CHECK_THROWS_AS(ternary_matmul_naive(a, w), ShapeError);
}

TEST_CASE("TernaryMatrix validation") {
    TernaryMatrix w(2, 2);
    w.t[1] = 2;
    CHECK_THROWS(w.validate());
    CHECK_THROWS_AS(TernaryMatrix(0, 3), ShapeError);
}

TEST_CASE("ModelConfig validation") {
    ModelConfig good{.d_model = 96, .d_ffn = 256, .n_layers = 2, .n_heads = 4, .max_seq = 32, .vocab = 50};
    CHECK_NOTHROW(good.validate());

    ModelConfig bad_heads = good;
    bad_heads.n_heads = 5;  // 96 % 5 != 0
    CHECK_THROWS_AS(bad_heads.validate(), ShapeError);

    ModelConfig odd_head = good;
    odd_head.d_model = 12;
    odd_head.n_heads = 4;  // d_head 3, odd
    CHECK_THROWS_AS(odd_head.validate(), ShapeError);
}

TEST_SUITE_END();
