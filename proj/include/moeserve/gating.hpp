// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "moeserve/profiles.hpp"

namespace moeserve {

// Expert selections driving a simulation: for every (token, layer) pair,
// top_k distinct slots in ascending order. Immutable after construction.
struct GatingTrace {
    uint64_t profile_fingerprint = 0;
    int tokens = 0;
    int num_layers = 0;
    int experts_per_layer = 0;
    int top_k = 0;
    std::vector<int32_t> slots;  // [(token * num_layers + layer) * top_k + i]

    const int32_t* record(int token, int layer) const {
        return slots.data() + (static_cast<size_t>(token) * num_layers + layer) * top_k;
    }

    friend bool operator==(const GatingTrace&, const GatingTrace&) = default;
};

// Samples top_k distinct slots uniformly without replacement per (token,
// layer), deterministically under the seed.
GatingTrace generate_trace(const ModelProfile& profile, int tokens, uint64_t seed);

// Text format, one record per line:
//   # moeserve-trace v1 fingerprint=<hex> tokens=N layers=L experts_per_layer=E top_k=K
//   token,layer,slot1,...,slotK      (ascending slots, canonical row order)
std::string write_trace(const GatingTrace& trace);
void write_trace_file(const GatingTrace& trace, const std::string& path);

// Validates every invariant; errors name the offending line.
GatingTrace read_trace(std::string_view document);
GatingTrace read_trace_file(const std::string& path);

}  // namespace moeserve
