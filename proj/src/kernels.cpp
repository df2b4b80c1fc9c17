// SPDX-License-Identifier: Apache-2.0
#include "tllm/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace tllm::kernels {

extern const Kernels kScalarKernels;
#if defined(__x86_64__) || defined(__i386__)
extern const Kernels kAvx2Kernels;
#endif

bool isa_supported(Isa isa) {
    switch (isa) {
        case Isa::scalar:
            return true;
        case Isa::avx2:
#if defined(__x86_64__) || defined(__i386__)
            return __builtin_cpu_supports("avx2");
#else
            return false;
#endif
    }
    return false;
}

const Kernels& get(Isa isa) {
    if (!isa_supported(isa)) {
        throw std::invalid_argument(std::string("kernel ISA not supported on this CPU: ") + isa_name(isa));
    }
    switch (isa) {
        case Isa::scalar:
            return kScalarKernels;
        case Isa::avx2:
#if defined(__x86_64__) || defined(__i386__)
            return kAvx2Kernels;
#else
            break;
#endif
    }
    return kScalarKernels;
}

namespace {

Isa detect_best() {
    if (isa_supported(Isa::avx2)) return Isa::avx2;
    return Isa::scalar;
}

Isa initial_isa() {
    if (const char* env = std::getenv("TLLM_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) return Isa::scalar;
        if (std::strcmp(env, "avx2") == 0 && isa_supported(Isa::avx2)) return Isa::avx2;
    }
    return detect_best();
}

std::atomic<Isa>& active_slot() {
    static std::atomic<Isa> slot{initial_isa()};
    return slot;
}

}  // namespace

const Kernels& active() { return get(active_slot().load(std::memory_order_relaxed)); }

Isa active_isa() { return active_slot().load(std::memory_order_relaxed); }

void force(Isa isa) {
    if (!isa_supported(isa)) {
        throw std::invalid_argument(std::string("kernel ISA not supported on this CPU: ") + isa_name(isa));
    }
    active_slot().store(isa, std::memory_order_relaxed);
}

void select_best() { active_slot().store(detect_best(), std::memory_order_relaxed); }

const char* isa_name(Isa isa) {
    switch (isa) {
        case Isa::scalar:
            return "scalar";
        case Isa::avx2:
            return "avx2";
    }
    return "?";
}

}  // namespace tllm::kernels
