// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

namespace moeserve {

using bytes_t = std::int64_t;

enum class Precision { P4, P16 };
enum class NonexpertPrecision { P4, P8, P16 };
enum class Preference { Throughput, Quality };

// Architecture and cost constants of one MoE model. All sizes are exact
// integer bytes; GB/MB in configs mean powers of ten. Immutable after load;
// safe to share across threads.
//
// Defaults describe a 32-layer, 8-experts-per-layer model with 336 MB
// 16-bit experts and 3.16 GB of 16-bit non-expert weights. The compute
// latencies are calibrated so a fully GPU-resident 16-bit deployment
// generates 13.00 tokens/s, with the non-expert share fixed at 10% of the
// token budget:
//   nonexpert_latency_s  = 0.1 / 13.00
//   compute_latency16_s  = 0.9 / (13.00 * num_layers * top_k)
struct ModelProfile {
    int num_layers = 32;
    int experts_per_layer = 8;
    int top_k = 2;  // experts activated per layer per token
    bytes_t size_nonexpert_bytes = 3'160'000'000;
    bytes_t size_expert16_bytes = 336'000'000;
    double quant_ratio = 4.0;  // 16-bit size / 4-bit size
    double compute_latency16_s = 0.9 / (13.0 * 32.0 * 2.0);
    double compute_penalty4 = 1.15;  // 4-bit matmul slowdown multiplier
    double nonexpert_latency_s = 0.1 / 13.0;

    int num_experts() const { return num_layers * experts_per_layer; }

    friend bool operator==(const ModelProfile&, const ModelProfile&) = default;
};

struct HardwareProfile {
    bytes_t gpu_mem_bytes = 80'000'000'000;
    // Effective CPU->GPU bandwidth; default derived from one 336 MB expert
    // transfer taking 27.35 ms.
    double transfer_bw_bytes_per_s = 336'000'000.0 / 0.02735;

    friend bool operator==(const HardwareProfile&, const HardwareProfile&) = default;
};

// One planning request: the preference plus the knobs that parameterize it.
struct TaskRequest {
    Preference preference = Preference::Throughput;
    std::optional<int> n4_target;  // required for Quality, ignored for Throughput
    uint64_t seed = 0;
};

// Built-in profiles. `mixtral_sec41` carries the per-component constants
// (3.16 GB non-expert, 336 MB experts); `mixtral_table1` is sized top-down
// from a 94.21 GB 16-bit total with a 26.62 GB all-4-bit-expert floor, which
// puts the non-expert share at 4.09 GB and one 16-bit expert at 352,031,250
// bytes. The two do not agree; both are kept on purpose.
ModelProfile mixtral_sec41();
ModelProfile mixtral_table1();
HardwareProfile default_hardware();

// Throw ValidationError naming the violated invariant.
void validate_profile(const ModelProfile& profile);
void validate_hardware(const HardwareProfile& hw);
void validate_task(const TaskRequest& task, const ModelProfile& profile);

// Parses an INI-style document with [model] and [hardware] sections; keys
// match the struct field names, `builtin = <name>` selects a built-in model
// baseline, and missing keys take the documented defaults. Unknown keys and
// sections are rejected. See README for the full schema.
std::pair<ModelProfile, HardwareProfile> load_profiles(std::string_view document);
std::pair<ModelProfile, HardwareProfile> load_profiles_file(const std::string& path);

// "30GB", "336MB", "84000000" or "84000000B" -> exact bytes (powers of ten).
bytes_t parse_size(std::string_view text);

bytes_t expert_size(const ModelProfile& profile, Precision precision);

// Non-expert layers at the given precision (16-bit size divided by 1, 2 or 4)
// plus n4 experts at 4-bit and the remaining experts at 16-bit.
bytes_t model_size(const ModelProfile& profile, int n4, NonexpertPrecision nonexpert_precision);

// Every weight, experts included, at one homogeneous precision. Baseline
// sizing for comparing against the mixed-precision range.
bytes_t uniform_model_size(const ModelProfile& profile, NonexpertPrecision precision);

// FNV-1a over a canonical field encoding, stamped into every serialized
// artifact so stale plans and traces are rejected on load.
uint64_t profile_fingerprint(const ModelProfile& profile);
std::string fingerprint_hex(uint64_t fingerprint);

}  // namespace moeserve
