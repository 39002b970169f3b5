// SPDX-License-Identifier: Apache-2.0
#include "moeserve/planner.hpp"

#include <algorithm>
#include <cmath>

#include "moeserve/errors.hpp"
#include "moeserve/rng.hpp"

namespace moeserve {

namespace {

std::string describe(ExpertId id) {
    return "(" + std::to_string(id.layer) + "," + std::to_string(id.slot) + ")";
}

}  // namespace

int expert_index(const ModelProfile& profile, ExpertId id) {
    if (id.layer < 0 || id.layer >= profile.num_layers || id.slot < 0 ||
        id.slot >= profile.experts_per_layer)
        throw ValidationError("expert id " + describe(id) + " out of bounds for " +
                              std::to_string(profile.num_layers) + "x" +
                              std::to_string(profile.experts_per_layer) + " model");
    return id.layer * profile.experts_per_layer + id.slot;
}

ExpertId expert_id_at(const ModelProfile& profile, int index) {
    return {index / profile.experts_per_layer, index % profile.experts_per_layer};
}

int num_experts_16(bytes_t mem_gpu, const ModelProfile& profile) {
    const bytes_t size4 = expert_size(profile, Precision::P4);
    const bytes_t all4_resident =
        profile.size_nonexpert_bytes + static_cast<bytes_t>(profile.num_experts()) * size4;
    if (mem_gpu <= all4_resident) return 0;
    const double upgrade_cost = (profile.quant_ratio - 1.0) * static_cast<double>(size4);
    const double unclamped = std::floor(static_cast<double>(mem_gpu - all4_resident) / upgrade_cost);
    return static_cast<int>(std::min(unclamped, static_cast<double>(profile.num_experts())));
}

std::vector<ExpertId> assign_quantization(int n4, const ModelProfile& profile, uint64_t seed) {
    const int num_e = profile.num_experts();
    if (n4 < 0 || n4 > num_e)
        throw ValidationError("n4 out of range: " + std::to_string(n4) + " (expert count " +
                              std::to_string(num_e) + ")");
    Xoshiro256 rng(seed);
    std::vector<int> picked = sample_without_replacement(num_e, n4, rng);
    std::sort(picked.begin(), picked.end());
    std::vector<ExpertId> ids;
    ids.reserve(picked.size());
    for (int index : picked) ids.push_back(expert_id_at(profile, index));
    return ids;
}

PlacementPlan assign_locations(const std::vector<Precision>& precisions,
                               const HardwareProfile& hw, const ModelProfile& profile,
                               uint64_t seed) {
    const int num_e = profile.num_experts();
    if (static_cast<int>(precisions.size()) != num_e)
        throw ValidationError("precision map covers " + std::to_string(precisions.size()) +
                              " experts, profile defines " + std::to_string(num_e));

    // Priority order: 4-bit experts first, then 16-bit, each ascending index.
    std::vector<int> order;
    order.reserve(static_cast<size_t>(num_e));
    for (Precision wanted : {Precision::P4, Precision::P16})
        for (int i = 0; i < num_e; ++i)
            if (precisions[static_cast<size_t>(i)] == wanted) order.push_back(i);

    const bytes_t size4 = expert_size(profile, Precision::P4);
    const bytes_t size16 = expert_size(profile, Precision::P16);
    auto size_of = [&](int index) {
        return precisions[static_cast<size_t>(index)] == Precision::P4 ? size4 : size16;
    };

    // suffix_max[k] = swap slot needed if order[k..] stays on CPU.
    std::vector<bytes_t> suffix_max(static_cast<size_t>(num_e) + 1, 0);
    for (int i = num_e - 1; i >= 0; --i)
        suffix_max[static_cast<size_t>(i)] =
            std::max(suffix_max[static_cast<size_t>(i) + 1], size_of(order[static_cast<size_t>(i)]));

    // footprint(k) = non-expert + first k experts + swap for the rest; this is
    // non-decreasing in k, so the first overshoot ends the scan.
    int resident = -1;
    bytes_t prefix = 0;
    for (int k = 0; k <= num_e; ++k) {
        if (k > 0) prefix += size_of(order[static_cast<size_t>(k - 1)]);
        const bytes_t footprint =
            profile.size_nonexpert_bytes + prefix + suffix_max[static_cast<size_t>(k)];
        if (footprint > hw.gpu_mem_bytes) break;
        resident = k;
    }
    if (resident < 0)
        throw InfeasibleError(
            "GPU budget " + std::to_string(hw.gpu_mem_bytes) +
            " B cannot hold the non-expert layers (" + std::to_string(profile.size_nonexpert_bytes) +
            " B) plus a swap slot (" + std::to_string(suffix_max[0]) + " B)");

    PlacementPlan plan;
    plan.seed = seed;
    plan.entries.resize(static_cast<size_t>(num_e));
    for (int i = 0; i < num_e; ++i)
        plan.entries[static_cast<size_t>(i)] = {precisions[static_cast<size_t>(i)], Location::CPU};
    for (int i = 0; i < resident; ++i)
        plan.entries[static_cast<size_t>(order[static_cast<size_t>(i)])].location = Location::GPU;
    plan.swap_slot_bytes = suffix_max[static_cast<size_t>(resident)];
    return plan;
}

PlacementPlan plan_throughput(const TaskRequest& task, const HardwareProfile& hw,
                              const ModelProfile& profile) {
    if (task.preference != Preference::Throughput)
        throw ValidationError("plan_throughput called with a non-throughput preference");
    const int num_e = profile.num_experts();
    const int n16 = num_experts_16(hw.gpu_mem_bytes, profile);
    const int n4 = num_e - n16;
    std::vector<Precision> precisions(static_cast<size_t>(num_e), Precision::P16);
    for (ExpertId id : assign_quantization(n4, profile, task.seed))
        precisions[static_cast<size_t>(expert_index(profile, id))] = Precision::P4;
    return assign_locations(precisions, hw, profile, task.seed);
}

PlacementPlan plan_quality(const TaskRequest& task, const HardwareProfile& hw,
                           const ModelProfile& profile) {
    if (task.preference != Preference::Quality)
        throw ValidationError("plan_quality called with a non-quality preference");
    validate_task(task, profile);
    const int num_e = profile.num_experts();
    std::vector<Precision> precisions(static_cast<size_t>(num_e), Precision::P16);
    for (ExpertId id : assign_quantization(*task.n4_target, profile, task.seed))
        precisions[static_cast<size_t>(expert_index(profile, id))] = Precision::P4;
    return assign_locations(precisions, hw, profile, task.seed);
}

PlacementPlan make_plan(const TaskRequest& task, const HardwareProfile& hw,
                        const ModelProfile& profile) {
    return task.preference == Preference::Throughput ? plan_throughput(task, hw, profile)
                                                     : plan_quality(task, hw, profile);
}

bytes_t gpu_footprint(const PlacementPlan& plan, const ModelProfile& profile) {
    bytes_t total = profile.size_nonexpert_bytes + plan.swap_slot_bytes;
    for (const auto& entry : plan.entries)
        if (entry.location == Location::GPU) total += expert_size(profile, entry.precision);
    return total;
}

bytes_t required_swap_bytes(const PlacementPlan& plan, const ModelProfile& profile) {
    bytes_t swap = 0;
    for (const auto& entry : plan.entries)
        if (entry.location == Location::CPU)
            swap = std::max(swap, expert_size(profile, entry.precision));
    return swap;
}

std::vector<std::string> validate_plan(const PlacementPlan& plan, const HardwareProfile& hw,
                                       const ModelProfile& profile) {
    std::vector<std::string> violations;
    const int num_e = profile.num_experts();
    if (static_cast<int>(plan.entries.size()) != num_e)
        violations.push_back("plan has " + std::to_string(plan.entries.size()) +
                             " entries, profile defines " + std::to_string(num_e) + " experts");

    const bytes_t swap = required_swap_bytes(plan, profile);
    if (plan.swap_slot_bytes != swap)
        violations.push_back("swap_slot_bytes is " + std::to_string(plan.swap_slot_bytes) +
                             ", expected " + std::to_string(swap) +
                             " (largest CPU-resident expert, 0 when none)");

    const bytes_t footprint = gpu_footprint(plan, profile);
    if (footprint > hw.gpu_mem_bytes)
        violations.push_back("gpu footprint " + std::to_string(footprint) + " B exceeds budget " +
                             std::to_string(hw.gpu_mem_bytes) + " B by " +
                             std::to_string(footprint - hw.gpu_mem_bytes) + " B");
    return violations;
}

PlanSummary summarize(const PlacementPlan& plan, const ModelProfile& profile,
                      const HardwareProfile& hw) {
    PlanSummary s;
    for (const auto& entry : plan.entries) {
        if (entry.precision == Precision::P4) ++s.n4;
        if (entry.location == Location::GPU) ++s.n_gpu;
    }
    s.gpu_bytes = gpu_footprint(plan, profile);
    s.headroom_bytes = hw.gpu_mem_bytes - s.gpu_bytes;
    return s;
}

}  // namespace moeserve
