// SPDX-License-Identifier: Apache-2.0
#include "moeserve/reconfig.hpp"

#include <string>
#include <unordered_set>

#include "moeserve/errors.hpp"

namespace moeserve {

namespace {

std::string describe(ExpertId id) {
    return "(" + std::to_string(id.layer) + "," + std::to_string(id.slot) + ")";
}

}  // namespace

ReconfigPlan diff_plans(const PlacementPlan& from, const PlacementPlan& to,
                        const ModelProfile& profile, const HardwareProfile& hw) {
    const size_t num_e = static_cast<size_t>(profile.num_experts());
    if (from.entries.size() != num_e || to.entries.size() != num_e)
        throw ValidationError("placement plans cover " + std::to_string(from.entries.size()) +
                              " and " + std::to_string(to.entries.size()) +
                              " experts; profile defines " + std::to_string(num_e) +
                              " (plans from another profile?)");

    ReconfigPlan rp;
    rp.target_seed = to.seed;
    // Releasing group first so a shrinking budget is honored before anything
    // new lands on the GPU.
    for (size_t i = 0; i < num_e; ++i) {
        const ExpertState& old_state = from.entries[i];
        const ExpertState& new_state = to.entries[i];
        const ExpertId id = expert_id_at(profile, static_cast<int>(i));
        if (old_state.location == Location::GPU && new_state.location == Location::CPU)
            rp.actions.push_back({ActionKind::Offload, id, new_state.precision, new_state.location});
        if (old_state.precision == Precision::P16 && new_state.precision == Precision::P4)
            rp.actions.push_back({ActionKind::Quantize, id, new_state.precision, new_state.location});
    }
    for (size_t i = 0; i < num_e; ++i) {
        const ExpertState& old_state = from.entries[i];
        const ExpertState& new_state = to.entries[i];
        const ExpertId id = expert_id_at(profile, static_cast<int>(i));
        if (old_state.precision == Precision::P4 && new_state.precision == Precision::P16)
            rp.actions.push_back({ActionKind::Dequantize, id, new_state.precision, new_state.location});
        if (old_state.location == Location::CPU && new_state.location == Location::GPU)
            rp.actions.push_back({ActionKind::Fetch, id, new_state.precision, new_state.location});
    }

    const auto [bytes, downtime] = estimate_cost(rp, profile, hw);
    rp.bytes_moved = bytes;
    rp.est_downtime_s = downtime;
    return rp;
}

std::pair<bytes_t, double> estimate_cost(const ReconfigPlan& actions, const ModelProfile& profile,
                                         const HardwareProfile& hw) {
    std::unordered_set<int> fetched;
    for (const auto& a : actions.actions)
        if (a.kind == ActionKind::Fetch) fetched.insert(expert_index(profile, a.expert));

    bytes_t bytes = 0;
    for (const auto& a : actions.actions) {
        switch (a.kind) {
            case ActionKind::Fetch:
                bytes += expert_size(profile, a.target_precision);
                break;
            case ActionKind::Dequantize:
                // In-place GPU upgrade pulls the 16-bit master from the CPU; a
                // CPU-side dequantize (or one folded into a fetch) is free.
                if (a.target_location == Location::GPU &&
                    !fetched.count(expert_index(profile, a.expert)))
                    bytes += expert_size(profile, Precision::P16);
                break;
            case ActionKind::Offload:
            case ActionKind::Quantize:
                break;
        }
    }
    return {bytes, static_cast<double>(bytes) / hw.transfer_bw_bytes_per_s};
}

PlacementPlan apply(const PlacementPlan& plan, const ReconfigPlan& actions,
                    const ModelProfile& profile, const HardwareProfile* budget) {
    const size_t num_e = static_cast<size_t>(profile.num_experts());
    if (plan.entries.size() != num_e)
        throw ValidationError("plan covers " + std::to_string(plan.entries.size()) +
                              " experts, profile defines " + std::to_string(num_e));

    // Exclusion invariant: an expert may move or requantize at most once.
    std::unordered_set<int> moved, requantized;
    for (const auto& a : actions.actions) {
        const int index = expert_index(profile, a.expert);
        if (a.kind == ActionKind::Offload || a.kind == ActionKind::Fetch) {
            if (!moved.insert(index).second)
                throw ValidationError("expert " + describe(a.expert) +
                                      " has both offload and fetch actions");
        } else {
            if (!requantized.insert(index).second)
                throw ValidationError("expert " + describe(a.expert) +
                                      " has both quantize and dequantize actions");
        }
    }

    PlacementPlan out = plan;
    bool consuming_started = false;
    for (const auto& a : actions.actions) {
        ExpertState& st = out.entries[static_cast<size_t>(expert_index(profile, a.expert))];
        switch (a.kind) {
            case ActionKind::Offload:
                if (st.location != Location::GPU)
                    throw ValidationError("inconsistent action: offload of CPU-resident expert " +
                                          describe(a.expert));
                st.location = Location::CPU;
                break;
            case ActionKind::Fetch:
                if (st.location != Location::CPU)
                    throw ValidationError("inconsistent action: fetch of GPU-resident expert " +
                                          describe(a.expert));
                st.location = Location::GPU;
                consuming_started = true;
                break;
            case ActionKind::Quantize:
                if (st.precision != Precision::P16)
                    throw ValidationError("inconsistent action: quantize of 4-bit expert " +
                                          describe(a.expert));
                st.precision = Precision::P4;
                break;
            case ActionKind::Dequantize:
                if (st.precision != Precision::P4)
                    throw ValidationError("inconsistent action: dequantize of 16-bit expert " +
                                          describe(a.expert));
                st.precision = Precision::P16;
                consuming_started = true;
                break;
        }
        const bool location_action =
            a.kind == ActionKind::Offload || a.kind == ActionKind::Fetch;
        if (location_action && st.location != a.target_location)
            throw ValidationError("action target location disagrees with replayed state for expert " +
                                  describe(a.expert));
        if (!location_action && st.precision != a.target_precision)
            throw ValidationError("action target precision disagrees with replayed state for expert " +
                                  describe(a.expert));

        if (budget && consuming_started) {
            out.swap_slot_bytes = required_swap_bytes(out, profile);
            const bytes_t footprint = gpu_footprint(out, profile);
            if (footprint > budget->gpu_mem_bytes)
                throw ValidationError("budget violated mid-sequence: footprint " +
                                      std::to_string(footprint) + " B exceeds " +
                                      std::to_string(budget->gpu_mem_bytes) + " B after " +
                                      describe(a.expert));
        }
    }

    out.swap_slot_bytes = required_swap_bytes(out, profile);
    out.seed = actions.target_seed;
    if (budget) {
        const bytes_t footprint = gpu_footprint(out, profile);
        if (footprint > budget->gpu_mem_bytes)
            throw ValidationError("budget violated by final state: footprint " +
                                  std::to_string(footprint) + " B exceeds " +
                                  std::to_string(budget->gpu_mem_bytes) + " B");
    }
    return out;
}

}  // namespace moeserve
