// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <string>

#include "tllm/core.hpp"

namespace tllm::hwmodel {

/// Device resource description and per-unit LUT cost coefficients
/// (calibration inputs).
struct DeviceBudget {
    int n_uram = 0;         // available URAM blocks (72b x 4096 each)
    double lut_max = 0.0;   // LUTs available to the matmul engine
    double lut_tree = 0.0;  // LUTs per precompute-tree output
    double lut_entry = 0.0; // LUTs per stored table entry
    double lut_lp = 0.0;    // LUTs per lookup + conversion/reduction logic

    void validate() const;
};

enum class TlmmMethod { full, partial, naive };

/// Table entries per group for a method: 3^g (full), (3^g-1)/2 (partial),
/// 0 (naive selection logic keeps no table; its cost is carried by lut_lp).
int64_t n_tb_for(TlmmMethod method, int g);

struct LutBudget {
    double lut_pre = 0.0;  // t * n_tb * lut_tree
    double lut_tb = 0.0;   // t * q * n_tb * lut_entry
    double lut_lpl = 0.0;  // t * q * lut_lp
    double total = 0.0;
    bool feasible = false;  // total <= lut_max
};

LutBudget lut_budget(int g, int t, int q, const DeviceBudget& budget, TlmmMethod method);

/// Widest index-vector that fits the cascaded URAM word:
/// t = floor(72 * c_uram / b_idx).
int select_T(int c_uram, int b_idx);

/// URAM blocks consumed by an x * y index buffer partitioned cyclically by
/// q/2 with cascade factor c_uram:
///   U = ceil((ceil(y/q) * ceil(x/(g*t))) / 4096) * c_uram * q/2
/// q must be even (dual-port URAMs serve two lookups each).
int64_t uram_count(int64_t x, int64_t y, int g, int t, int q, int c_uram);

enum class ProjKind { qkvo, up, down };

struct Addr3 {
    int64_t x = 0, y = 0, z = 0;
    bool operator==(const Addr3&) const = default;
};

/// Logical (a, b) weight index -> physical 3D buffer address. Bounds per
/// kind: qkvo a < d_model_p, b < d_model; up a < d_model_p, b < d_ffn_p;
/// down a < d_ffn_p, b < d_model.
Addr3 addr_translate(ProjKind kind, int64_t a, int64_t b, int64_t d_model, int64_t d_model_p,
                     int64_t d_ffn_p);

/// Index-vectors per 768-bit transfer after the 16-bit norm-weight slot:
/// floor(752 / (t * b_idx)). Requires t * b_idx <= 752.
int axi_pack_capacity(int t, int b_idx);

struct HwPlan {
    int g = 0, t = 0, q = 0, c_uram = 0;
    int b_idx = 0;
    int64_t n_tb = 0;
    LutBudget lut;
    int64_t uram_used = 0;
    int pack_capacity = 0;           // 0 when t*b_idx exceeds the transfer width
    int64_t d_model_p = 0, d_ffn_p = 0;  // dims padded to multiples of t*g
};

struct PlanSearchResult {
    std::optional<HwPlan> best;
    int64_t candidates = 0;
    int64_t rejected_lut = 0;
    int64_t rejected_uram = 0;
    int64_t rejected_t = 0;  // select_T produced t < 1
    std::string binding_constraint() const;
};

/// Enumerates (g, q, c_uram), derives t from the URAM word width, keeps
/// candidates satisfying the LUT and URAM constraints, and returns the
/// feasible plan maximizing t*q (lookup parallelism); ties broken by smaller
/// uram_used, then smaller lut total. Only even q values are considered.
PlanSearchResult plan_search(const DeviceBudget& budget, int d_model, int d_ffn,
                             std::span<const int> g_range, std::span<const int> q_range,
                             int c_max = 8);

int64_t pad_to_multiple(int64_t v, int64_t m);

}  // namespace tllm::hwmodel
