// SPDX-License-Identifier: Apache-2.0
//
// tllm command line: pack toy weights, run generation, compare kernels and
// attention schedules, and evaluate hardware plans. Reports are printed as
// human text plus machine-readable key=value lines.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "tllm/bench.hpp"
#include "tllm/hwmodel.hpp"
#include "tllm/kernels.hpp"
#include "tllm/model.hpp"
#include "tllm/weights_io.hpp"

namespace {

using nlohmann::json;

std::vector<int32_t> parse_ids(const std::string& text) {
    std::vector<int32_t> ids;
    std::istringstream in(text);
    int32_t v;
    while (in >> v) ids.push_back(v);
    return ids;
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.push_back(std::stoi(item));
    }
    return out;
}

std::vector<int> parse_x_list(const std::string& text) {
    std::vector<int> out;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, 'x')) out.push_back(std::stoi(item));
    return out;
}

tllm::ModelConfig config_from_json(const json& j) {
    tllm::ModelConfig cfg;
    cfg.d_model = j.at("d_model").get<int>();
    cfg.d_ffn = j.at("d_ffn").get<int>();
    cfg.n_layers = j.at("n_layers").get<int>();
    cfg.n_heads = j.at("n_heads").get<int>();
    cfg.max_seq = j.at("max_seq").get<int>();
    cfg.vocab = j.at("vocab").get<int>();
    cfg.rms_eps = j.value("rms_eps", 1e-5f);
    return cfg;
}

std::map<std::string, double> parse_device_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open device file: " + path);
    std::map<std::string, double> kv;
    std::string line;
    while (std::getline(f, line)) {
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const size_t eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!key.empty() && !value.empty()) kv[key] = std::stod(value);
    }
    return kv;
}

double require_key(const std::map<std::string, double>& kv, const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw std::runtime_error("device file missing key: " + key);
    return it->second;
}

int cmd_pack(const std::string& in_spec, const std::string& out_file, const tllm::TlmmParams& params) {
    std::ifstream f(in_spec);
    if (!f) throw std::runtime_error("cannot open model spec: " + in_spec);
    const json j = json::parse(f);

    const tllm::ModelConfig cfg = config_from_json(j);
    const uint64_t seed = j.value("seed", 1ull);
    const tllm::UnpackedModel model = tllm::make_toy_model(cfg, seed);
    const std::vector<uint8_t> bytes = tllm::pack_model(model, params);
    tllm::write_file(out_file, bytes);

    const int stride = params.group_stride();
    const auto pad = [stride](int v) { return (v + stride - 1) / stride * stride; };
    std::printf("packed %d layer(s), d_model %d (padded %d), d_ffn %d (padded %d)\n", cfg.n_layers,
                cfg.d_model, pad(cfg.d_model), cfg.d_ffn, pad(cfg.d_ffn));
    std::printf("g=%d t=%d q=%d b_idx=%d index_vector_bits=%d\n", params.g, params.t, params.q,
                params.b_idx(), params.ivec_bits());
    std::printf("d_model_padded=%d\nd_ffn_padded=%d\nfile_bytes=%zu\n", pad(cfg.d_model),
                pad(cfg.d_ffn), bytes.size());
    std::printf("wrote %s (%zu bytes)\n", out_file.c_str(), bytes.size());
    return 0;
}

int cmd_run(const std::string& weights_file, const std::string& prompt_text, int n_new, int n_pe,
            int threads, bool report) {
    const std::vector<int32_t> prompt = parse_ids(prompt_text);
    if (prompt.empty()) throw std::runtime_error("empty --prompt-ids");

    const tllm::ModelWeights mw = tllm::load_model(tllm::read_file(weights_file));
    tllm::GenStats stats;
    const std::vector<int32_t> out = tllm::generate(mw, prompt, n_new, n_pe, threads, &stats);

    std::printf("tokens:");
    for (int32_t id : out) std::printf(" %d", id);
    std::printf("\n");

    if (report) {
        const double prefill_tps =
            stats.prefill_seconds > 0 ? stats.prompt_tokens / stats.prefill_seconds : 0.0;
        const double decode_tps =
            stats.decode_seconds > 0 ? stats.decode_steps / stats.decode_seconds : 0.0;
        std::printf("prefill: %d tokens in %.4f s (%.1f tok/s)\n", stats.prompt_tokens,
                    stats.prefill_seconds, prefill_tps);
        std::printf("decode: %d steps in %.4f s (%.1f tok/s)\n", stats.decode_steps,
                    stats.decode_seconds, decode_tps);
        std::printf("prompt_tokens=%d\nnew_tokens=%d\n", stats.prompt_tokens, n_new);
        std::printf("prefill_seconds=%.6f\nprefill_tokens_per_s=%.3f\n", stats.prefill_seconds,
                    prefill_tps);
        std::printf("decode_steps=%d\ndecode_seconds=%.6f\ndecode_tokens_per_s=%.3f\n",
                    stats.decode_steps, stats.decode_seconds, decode_tps);
        std::printf("attn_score_ops=%llu\n", static_cast<unsigned long long>(stats.score_ops));
        std::printf("kernels=%s\nthreads=%d\n", tllm::kernels::isa_name(tllm::kernels::active_isa()),
                    threads);
    }
    return 0;
}

int cmd_bench(const std::vector<std::string>& compare, const std::string& sizes,
              const std::string& seq, const tllm::TlmmParams& params, int n_pe, uint64_t seed,
              int reps) {
    bool run_tlmm_full = false, run_tlmm_partial = false, run_attn = false;
    if (compare.empty()) {
        run_tlmm_full = run_tlmm_partial = run_attn = true;
    }
    for (const std::string& c : compare) {
        if (c == "tlmm:full") run_tlmm_full = true;
        else if (c == "tlmm:partial") run_tlmm_partial = true;
        else if (c == "tlmm:naive") run_tlmm_full = run_tlmm_partial = true;  // naive is the baseline
        else if (c == "attn:reversed" || c == "attn:naive") run_attn = true;
        else throw std::runtime_error("unknown --compare value: " + c);
    }

    int failures = 0;
    if (run_tlmm_full || run_tlmm_partial) {
        std::vector<std::string> size_items;
        std::istringstream in(sizes);
        std::string item;
        while (std::getline(in, item, ',')) size_items.push_back(item);
        for (const std::string& size : size_items) {
            const std::vector<int> mnk = parse_x_list(size);
            if (mnk.size() != 3) throw std::runtime_error("bad --sizes entry: " + size);
            const tllm::bench::TlmmCompare r =
                tllm::bench::compare_tlmm(mnk[0], mnk[1], mnk[2], params, seed, reps);
            std::printf("tlmm %dx%dx%d (g=%d t=%d q=%d): naive %.4f s, full %.4f s (%.2fx), "
                        "partial %.4f s (%.2fx)\n",
                        r.m, r.n, r.k, params.g, params.t, params.q, r.naive_seconds, r.full_seconds,
                        r.naive_seconds / r.full_seconds, r.partial_seconds,
                        r.naive_seconds / r.partial_seconds);
            std::printf("bench=tlmm size=%dx%dx%d g=%d t=%d q=%d naive_s=%.6f full_s=%.6f "
                        "partial_s=%.6f full_match=%d partial_match=%d\n",
                        r.m, r.n, r.k, params.g, params.t, params.q, r.naive_seconds, r.full_seconds,
                        r.partial_seconds, r.full_matches ? 1 : 0, r.partial_matches ? 1 : 0);
            if (run_tlmm_full && !r.full_matches) {
                std::printf("check failed: tlmm:full != tlmm:naive at %s\n", size.c_str());
                ++failures;
            }
            if (run_tlmm_partial && !r.partial_matches) {
                std::printf("check failed: tlmm:partial != tlmm:naive at %s\n", size.c_str());
                ++failures;
            }
        }
    }
    if (run_attn) {
        for (int n : parse_int_list(seq)) {
            const tllm::bench::AttnCompare r =
                tllm::bench::compare_attention(n, 4, 16, n_pe, seed, reps);
            std::printf("attn n=%d n_pe=%d: reversed %.4f s / %llu score ops, naive %.4f s / %llu "
                        "score ops (ratio %.3f)\n",
                        r.n, r.n_pe, r.reversed_seconds,
                        static_cast<unsigned long long>(r.reversed_score_ops), r.naive_seconds,
                        static_cast<unsigned long long>(r.naive_score_ops), r.score_op_ratio());
            std::printf("bench=attn n=%d n_pe=%d heads=%d d_head=%d reversed_s=%.6f naive_s=%.6f "
                        "reversed_score_ops=%llu naive_score_ops=%llu score_op_ratio=%.4f match=%d\n",
                        r.n, r.n_pe, r.n_heads, r.d_head, r.reversed_seconds, r.naive_seconds,
                        static_cast<unsigned long long>(r.reversed_score_ops),
                        static_cast<unsigned long long>(r.naive_score_ops), r.score_op_ratio(),
                        r.matches ? 1 : 0);
            if (!r.matches) {
                std::printf("check failed: attn:reversed != attn:naive at n=%d (max |delta| %g)\n", n,
                            static_cast<double>(r.max_abs_diff));
                ++failures;
            }
        }
    }
    if (failures > 0) {
        std::printf("%d bench check(s) failed\n", failures);
        return 1;
    }
    return 0;
}

int cmd_hw_plan(const std::string& device_file, const std::string& dims, const std::string& g_range,
                const std::string& q_range, int c_max) {
    const std::map<std::string, double> kv = parse_device_file(device_file);
    tllm::hwmodel::DeviceBudget budget;
    budget.n_uram = static_cast<int>(require_key(kv, "n_uram"));
    budget.lut_max = require_key(kv, "lut_max");
    budget.lut_tree = require_key(kv, "lut_tree");
    budget.lut_entry = require_key(kv, "lut_entry");
    budget.lut_lp = require_key(kv, "lut_lp");

    const std::vector<int> d = parse_x_list(dims);
    if (d.size() != 2) throw std::runtime_error("--dims must be <d_model>x<d_ffn>");
    const std::vector<int> gs = parse_int_list(g_range);
    const std::vector<int> qs = parse_int_list(q_range);

    const tllm::hwmodel::PlanSearchResult r =
        tllm::hwmodel::plan_search(budget, d[0], d[1], gs, qs, c_max);
    std::printf("searched %lld candidate(s): %lld over lut_max, %lld over n_uram, %lld with t<1\n",
                static_cast<long long>(r.candidates), static_cast<long long>(r.rejected_lut),
                static_cast<long long>(r.rejected_uram), static_cast<long long>(r.rejected_t));
    if (!r.best.has_value()) {
        std::printf("no feasible plan: %s\n", r.binding_constraint().c_str());
        std::printf("feasible=0\n");
        return 0;
    }
    const tllm::hwmodel::HwPlan& p = *r.best;
    std::printf("plan: g=%d t=%d q=%d c_uram=%d (b_idx=%d, %lld table entries)\n", p.g, p.t, p.q,
                p.c_uram, p.b_idx, static_cast<long long>(p.n_tb));
    std::printf("lut: pre %.1f + table %.1f + lookup %.1f = %.1f of %.1f\n", p.lut.lut_pre,
                p.lut.lut_tb, p.lut.lut_lpl, p.lut.total, budget.lut_max);
    std::printf("uram: %lld of %d, padded dims %lld x %lld, %d index vector(s) per 768-bit transfer\n",
                static_cast<long long>(p.uram_used), budget.n_uram,
                static_cast<long long>(p.d_model_p), static_cast<long long>(p.d_ffn_p),
                p.pack_capacity);
    std::printf("feasible=1\ng=%d\nt=%d\nq=%d\nc_uram=%d\nb_idx=%d\nn_tb=%lld\n", p.g, p.t, p.q,
                p.c_uram, p.b_idx, static_cast<long long>(p.n_tb));
    std::printf("lut_pre=%.3f\nlut_tb=%.3f\nlut_lpl=%.3f\nlut_total=%.3f\n", p.lut.lut_pre,
                p.lut.lut_tb, p.lut.lut_lpl, p.lut.total);
    std::printf("uram_used=%lld\npack_capacity=%d\nd_model_padded=%lld\nd_ffn_padded=%lld\n",
                static_cast<long long>(p.uram_used), p.pack_capacity,
                static_cast<long long>(p.d_model_p), static_cast<long long>(p.d_ffn_p));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ternary-weight LLM inference engine with table-lookup matmul"};
    app.require_subcommand(1);

    std::string kernels_choice = "auto";
    int threads = 1;
    app.add_option("--kernels", kernels_choice, "kernel ISA: auto, scalar, avx2")
        ->check(CLI::IsMember({"auto", "scalar", "avx2"}));
    app.add_option("--threads", threads, "worker threads for matmul rows")->check(CLI::Range(1, 256));

    // pack
    auto* pack = app.add_subcommand("pack", "generate and pack a model weight file");
    std::string in_spec, out_file;
    tllm::TlmmParams params{3, 4, 4};
    pack->add_option("in_spec", in_spec, "model spec JSON (dims, seed)")->required();
    pack->add_option("out_file", out_file, "output weight file")->required();
    pack->add_option("--g", params.g, "trits per group");
    pack->add_option("--t", params.t, "tables per step");
    pack->add_option("--q", params.q, "parallel lookups per table");

    // run
    auto* run = app.add_subcommand("run", "greedy generation from a weight file");
    std::string weights_file, prompt_text;
    int n_new = 16, n_pe = 8;
    bool report = false;
    run->add_option("weights", weights_file, "packed weight file")->required();
    run->add_option("--prompt-ids", prompt_text, "whitespace-separated token ids")->required();
    run->add_option("--n-new", n_new, "tokens to generate");
    run->add_option("--n-pe", n_pe, "prefill attention query block size");
    run->add_flag("--report", report, "print timing and score-op report");

    // bench
    auto* bench = app.add_subcommand("bench", "paired kernel/schedule comparisons");
    std::vector<std::string> compare;
    std::string sizes = "16x768x768";
    std::string seq = "64,128";
    uint64_t seed = 42;
    int reps = 3;
    tllm::TlmmParams bench_params{3, 28, 16};
    bench->add_option("--compare", compare,
                      "tlmm:naive|full|partial or attn:naive|reversed (repeatable)");
    bench->add_option("--sizes", sizes, "tlmm sizes, comma list of MxNxK");
    bench->add_option("--seq", seq, "attention sequence lengths, comma list");
    bench->add_option("--g", bench_params.g, "trits per group");
    bench->add_option("--t", bench_params.t, "tables per step");
    bench->add_option("--q", bench_params.q, "parallel lookups per table");
    bench->add_option("--n-pe", n_pe, "attention query block size");
    bench->add_option("--seed", seed, "input seed");
    bench->add_option("--reps", reps, "timing repetitions (best-of)");

    // hw-plan
    auto* hw = app.add_subcommand("hw-plan", "analytic resource model / parameter selection");
    std::string device_file, dims = "1536x4096", g_range = "2,3,4", q_range = "2,4,8,16,32";
    int c_max = 8;
    hw->add_option("device", device_file, "device description file (key=value)")->required();
    hw->add_option("--dims", dims, "logical <d_model>x<d_ffn>");
    hw->add_option("--g-range", g_range, "group sizes to search, comma list");
    hw->add_option("--q-range", q_range, "lookup widths to search, comma list (even)");
    hw->add_option("--c-max", c_max, "max URAM cascade factor");

    CLI11_PARSE(app, argc, argv);

    try {
        if (kernels_choice == "scalar") tllm::kernels::force(tllm::kernels::Isa::scalar);
        else if (kernels_choice == "avx2") tllm::kernels::force(tllm::kernels::Isa::avx2);

        if (pack->parsed()) return cmd_pack(in_spec, out_file, params);
        if (run->parsed()) return cmd_run(weights_file, prompt_text, n_new, n_pe, threads, report);
        if (bench->parsed()) return cmd_bench(compare, sizes, seq, bench_params, n_pe, seed, reps);
        if (hw->parsed()) return cmd_hw_plan(device_file, dims, g_range, q_range, c_max);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
