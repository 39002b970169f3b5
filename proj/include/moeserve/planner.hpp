// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include "moeserve/profiles.hpp"

namespace moeserve {

enum class Location { GPU, CPU };

// One expert, addressed as (transformer layer, expert slot within the layer).
struct ExpertId {
    int layer = 0;
    int slot = 0;
    friend constexpr auto operator<=>(const ExpertId&, const ExpertId&) = default;
};

struct ExpertState {
    Precision precision = Precision::P16;
    Location location = Location::CPU;
    friend constexpr bool operator==(const ExpertState&, const ExpertState&) = default;
};

// The two-attribute expert table plus the swap reservation for in-flight
// transfers. Entries are dense, indexed layer * experts_per_layer + slot.
// Treated as immutable once built.
struct PlacementPlan {
    std::vector<ExpertState> entries;
    bytes_t swap_slot_bytes = 0;
    uint64_t seed = 0;  // seed used for the quantization assignment
    friend bool operator==(const PlacementPlan&, const PlacementPlan&) = default;
};

struct PlanSummary {
    int n4 = 0;
    int n_gpu = 0;
    bytes_t gpu_bytes = 0;
    bytes_t headroom_bytes = 0;
};

int expert_index(const ModelProfile& profile, ExpertId id);
ExpertId expert_id_at(const ModelProfile& profile, int index);

// How many experts stay 16-bit under a throughput preference: the budget in
// excess of an all-4-bit fully resident model buys upgrades at the per-expert
// cost delta between the two formats. Zero whenever the all-4-bit model does
// not fit; clamped to the expert count above.
int num_experts_16(bytes_t mem_gpu, const ModelProfile& profile);

// Uniformly random n4-subset of all experts (partial Fisher-Yates over ids in
// ascending (layer, slot) order), returned sorted. Deterministic per seed.
std::vector<ExpertId> assign_quantization(int n4, const ModelProfile& profile, uint64_t seed);

// Greedy residency assignment: 4-bit experts claim GPU space before 16-bit
// ones, each class in ascending (layer, slot) order, stopping at the largest
// prefix that still leaves room for the swap slot implied by the experts left
// on CPU. Throws InfeasibleError when not even the non-expert layers plus the
// swap slot fit.
PlacementPlan assign_locations(const std::vector<Precision>& precisions,
                               const HardwareProfile& hw, const ModelProfile& profile,
                               uint64_t seed = 0);

PlacementPlan plan_throughput(const TaskRequest& task, const HardwareProfile& hw,
                              const ModelProfile& profile);
PlacementPlan plan_quality(const TaskRequest& task, const HardwareProfile& hw,
                           const ModelProfile& profile);
PlacementPlan make_plan(const TaskRequest& task, const HardwareProfile& hw,
                        const ModelProfile& profile);

// Non-expert layers + GPU-resident experts at their precision + swap slot.
bytes_t gpu_footprint(const PlacementPlan& plan, const ModelProfile& profile);

// Largest CPU-resident expert at its assigned precision; zero when everything
// is GPU-resident.
bytes_t required_swap_bytes(const PlacementPlan& plan, const ModelProfile& profile);

// Every invariant violation, not just the first. Empty result means valid.
std::vector<std::string> validate_plan(const PlacementPlan& plan, const HardwareProfile& hw,
                                       const ModelProfile& profile);

PlanSummary summarize(const PlacementPlan& plan, const ModelProfile& profile,
                      const HardwareProfile& hw);

}  // namespace moeserve
