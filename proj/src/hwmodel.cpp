// SPDX-License-Identifier: Apache-2.0
#include "tllm/hwmodel.hpp"

#include <sstream>

#include "tllm/tlmm.hpp"

namespace tllm::hwmodel {

namespace {
int64_t ceil_div(int64_t a, int64_t b) { return (a + b - 1) / b; }
}  // namespace

int64_t pad_to_multiple(int64_t v, int64_t m) { return ceil_div(v, m) * m; }

void DeviceBudget::validate() const {
    if (n_uram < 1 || !(lut_max > 0.0) || !(lut_tree > 0.0) || !(lut_entry > 0.0) || !(lut_lp > 0.0)) {
        throw std::invalid_argument("DeviceBudget: all fields must be positive");
    }
}

int64_t n_tb_for(TlmmMethod method, int g) {
    switch (method) {
        case TlmmMethod::full:
            return pow3(g);
        case TlmmMethod::partial:
            return (pow3(g) - 1) / 2;
        case TlmmMethod::naive:
            return 0;
    }
    return 0;
}

LutBudget lut_budget(int g, int t, int q, const DeviceBudget& budget, TlmmMethod method) {
    if (g < 1 || t < 1 || q < 1) {
        throw std::invalid_argument("lut_budget: g, t, q must be >= 1");
    }
    const double n_tb = static_cast<double>(n_tb_for(method, g));
    LutBudget r;
    r.lut_pre = t * n_tb * budget.lut_tree;
    r.lut_tb = static_cast<double>(t) * q * n_tb * budget.lut_entry;
    r.lut_lpl = static_cast<double>(t) * q * budget.lut_lp;
    r.total = r.lut_pre + r.lut_tb + r.lut_lpl;
    r.feasible = r.total <= budget.lut_max;
    return r;
}

int select_T(int c_uram, int b_idx) {
    if (c_uram < 1 || b_idx < 1) {
        throw std::invalid_argument("select_T: c_uram and b_idx must be >= 1");
    }
    // floor keeps the index vector within the cascaded 72*c word
    return (72 * c_uram) / b_idx;
}

int64_t uram_count(int64_t x, int64_t y, int g, int t, int q, int c_uram) {
    if (x < 1 || y < 1 || g < 1 || t < 1 || c_uram < 1) {
        throw std::invalid_argument("uram_count: dimensions and factors must be >= 1");
    }
    if (q < 2 || q % 2 != 0) {
        throw std::invalid_argument("uram_count: q must be even (cyclic factor q/2)");
    }
    const int64_t depth = ceil_div(y, q) * ceil_div(x, static_cast<int64_t>(g) * t);
    return ceil_div(depth, 4096) * c_uram * (q / 2);
}

Addr3 addr_translate(ProjKind kind, int64_t a, int64_t b, int64_t d_model, int64_t d_model_p,
                     int64_t d_ffn_p) {
    if (d_model < 1 || d_model_p < d_model || d_ffn_p < 1) {
        throw std::invalid_argument("addr_translate: bad dimensions");
    }
    const int64_t a_bound = kind == ProjKind::down ? d_ffn_p : d_model_p;
    const int64_t b_bound = kind == ProjKind::up ? d_ffn_p : d_model;
    if (a < 0 || a >= a_bound || b < 0 || b >= b_bound) {
        std::ostringstream msg;
        msg << "addr_translate: index (" << a << ", " << b << ") outside padded bounds";
        throw std::out_of_range(msg.str());
    }
    Addr3 r;
    switch (kind) {
        case ProjKind::qkvo:
            r.x = 0;
            break;
        case ProjKind::up:
            r.x = b / d_model;
            break;
        case ProjKind::down:
            r.x = a / d_model_p;
            break;
    }
    r.y = a % d_model_p;
    r.z = b % d_model;
    return r;
}

int axi_pack_capacity(int t, int b_idx) {
    if (t < 1 || b_idx < 1) {
        throw std::invalid_argument("axi_pack_capacity: t and b_idx must be >= 1");
    }
    const int width = t * b_idx;
    if (width > 752) {
        throw std::invalid_argument("axi_pack_capacity: index vector exceeds 752-bit payload");
    }
    // 768-bit transfer minus the 16-bit norm-weight slot
    return 752 / width;
}

std::string PlanSearchResult::binding_constraint() const {
    if (best.has_value()) return "none";
    std::ostringstream msg;
    msg << "no feasible plan out of " << candidates << " candidates (";
    msg << rejected_lut << " over lut_max, " << rejected_uram << " over n_uram, " << rejected_t
        << " with t < 1)";
    return msg.str();
}

PlanSearchResult plan_search(const DeviceBudget& budget, int d_model, int d_ffn,
                             std::span<const int> g_range, std::span<const int> q_range, int c_max) {
    budget.validate();
    if (d_model < 1 || d_ffn < 1) {
        throw std::invalid_argument("plan_search: dims must be >= 1");
    }
    if (g_range.empty() || q_range.empty()) {
        throw std::invalid_argument("plan_search: empty parameter range");
    }

    PlanSearchResult result;
    const int c_limit = std::min<int>(c_max, budget.n_uram);
    for (int g : g_range) {
        TlmmParams probe{g, 1, 1};
        probe.validate();
        const int b_idx = probe.b_idx();
        for (int q : q_range) {
            if (q < 2 || q % 2 != 0) continue;
            for (int c = 1; c <= c_limit; ++c) {
                ++result.candidates;
                const int t = select_T(c, b_idx);
                if (t < 1) {
                    ++result.rejected_t;
                    continue;
                }
                HwPlan plan;
                plan.g = g;
                plan.t = t;
                plan.q = q;
                plan.c_uram = c;
                plan.b_idx = b_idx;
                plan.n_tb = pow3(g);
                plan.d_model_p = pad_to_multiple(d_model, static_cast<int64_t>(t) * g);
                plan.d_ffn_p = pad_to_multiple(d_ffn, static_cast<int64_t>(t) * g);
                plan.lut = lut_budget(g, t, q, budget, TlmmMethod::full);
                plan.uram_used = uram_count(plan.d_ffn_p, plan.d_model_p, g, t, q, c);
                plan.pack_capacity = t * b_idx <= 752 ? axi_pack_capacity(t, b_idx) : 0;
                if (!plan.lut.feasible) {
                    ++result.rejected_lut;
                    continue;
                }
                if (plan.uram_used > budget.n_uram) {
                    ++result.rejected_uram;
                    continue;
                }
                if (!result.best.has_value()) {
                    result.best = plan;
                    continue;
                }
                const HwPlan& cur = *result.best;
                const int64_t tq_new = static_cast<int64_t>(plan.t) * plan.q;
                const int64_t tq_cur = static_cast<int64_t>(cur.t) * cur.q;
                if (tq_new > tq_cur ||
                    (tq_new == tq_cur && (plan.uram_used < cur.uram_used ||
                                          (plan.uram_used == cur.uram_used &&
                                           plan.lut.total < cur.lut.total)))) {
                    result.best = plan;
                }
            }
        }
    }
    return result;
}

}  // namespace tllm::hwmodel
