// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstring>

namespace tllm {

// Little-endian bit fields: field i of width `bits` occupies bit positions
// [i*bits, (i+1)*bits) counted from bit 0 of byte 0.
//
// Both helpers access memory through an unaligned 8-byte window, so buffers
// must be allocated with at least 7 bytes of slack past the last field.
// PackedWeights guarantees this for its index storage.

inline uint32_t read_bits(const uint8_t* base, size_t bit_pos, int bits) {
    uint64_t window;
    std::memcpy(&window, base + (bit_pos >> 3), sizeof(window));
    return static_cast<uint32_t>((window >> (bit_pos & 7)) & ((uint64_t{1} << bits) - 1));
}

inline void write_bits(uint8_t* base, size_t bit_pos, int bits, uint32_t value) {
    uint64_t window;
    uint8_t* p = base + (bit_pos >> 3);
    std::memcpy(&window, p, sizeof(window));
    const int shift = static_cast<int>(bit_pos & 7);
    const uint64_t mask = ((uint64_t{1} << bits) - 1) << shift;
    window = (window & ~mask) | (static_cast<uint64_t>(value) << shift);
    std::memcpy(p, &window, sizeof(window));
}

}  // namespace tllm
