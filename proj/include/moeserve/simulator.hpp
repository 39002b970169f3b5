// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "moeserve/gating.hpp"
#include "moeserve/planner.hpp"

namespace moeserve {

// Residency handling for experts the plan leaves on the CPU.
//
// Static is the fixed-placement model: a missed expert lands in the single
// swap slot, serves the current activation and is overwritten by the next
// miss, so CPU-resident experts miss on every activation.
//
// Lru augments the static placement with a managed fetch cache of
// `capacity_slots` expert slots: fetched experts stay usable until evicted as
// least-recently-used. Plan-resident GPU experts are pinned and never
// evicted; eviction counts slots, byte accounting uses per-expert sizes.
struct ResidencyPolicy {
    enum class Kind { Static, Lru };
    Kind kind = Kind::Static;
    int capacity_slots = 1;  // Lru only, >= 1

    static ResidencyPolicy static_policy() { return {Kind::Static, 1}; }
    static ResidencyPolicy lru(int capacity_slots) { return {Kind::Lru, capacity_slots}; }
};

// All time is accumulated in integer nanoseconds so runs are bit-reproducible;
// the floating-point views are derived.
struct SimReport {
    int tokens = 0;
    int64_t activations = 0;
    int64_t hits = 0;
    bytes_t bytes_transferred = 0;
    int64_t transfer_ns = 0;
    int64_t compute_ns = 0;
    int64_t nonexpert_ns = 0;

    int64_t total_ns() const { return transfer_ns + compute_ns + nonexpert_ns; }
    double total_time_s() const { return static_cast<double>(total_ns()) / 1e9; }
    double transfer_time_s() const { return static_cast<double>(transfer_ns) / 1e9; }
    double compute_time_s() const { return static_cast<double>(compute_ns) / 1e9; }
    double nonexpert_time_s() const { return static_cast<double>(nonexpert_ns) / 1e9; }
    double throughput_tps() const { return tokens / total_time_s(); }
    double hit_rate() const {
        return activations == 0 ? 1.0 : static_cast<double>(hits) / static_cast<double>(activations);
    }

    friend bool operator==(const SimReport&, const SimReport&) = default;
};

// Serial-stall execution model: a miss transfers the expert (stalling the
// pipeline), then computes; hits only compute. Per token the non-expert
// latency is added once.
SimReport simulate(const PlacementPlan& plan, const GatingTrace& trace,
                   const ModelProfile& profile, const HardwareProfile& hw,
                   const ResidencyPolicy& policy);

// Closed-form throughput under Static residency and uniform gating: each slot
// is activated with probability top_k / experts_per_layer per token, so the
// expected token latency sums the layer-averaged compute plus the expected
// miss transfers. Serves as the analytic cross-check for simulate().
double expected_throughput(const PlacementPlan& plan, const ModelProfile& profile,
                           const HardwareProfile& hw);

struct SweepEntry {
    bytes_t budget = 0;
    bool feasible = false;
    PlanSummary summary;
    SimReport report;
};

// Plans and simulates once per budget (Static policy) over a single trace
// generated from the seed. Infeasible budgets are marked, not errors.
std::vector<SweepEntry> sweep_memory(const std::vector<bytes_t>& budgets, const TaskRequest& task,
                                     const ModelProfile& profile, const HardwareProfile& hw_template,
                                     int tokens, uint64_t seed);

}  // namespace moeserve
