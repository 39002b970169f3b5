// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "moeserve/planner.hpp"

namespace moeserve {

enum class ActionKind { Offload, Fetch, Quantize, Dequantize };

// One state transition for one expert. The target fields record the expert's
// entry in the destination plan, which makes the transfer cost of the action
// list recomputable without the source plan and lets replays cross-check the
// evolving state.
struct ReconfigAction {
    ActionKind kind = ActionKind::Offload;
    ExpertId expert;
    Precision target_precision = Precision::P16;
    Location target_location = Location::CPU;
    friend constexpr bool operator==(const ReconfigAction&, const ReconfigAction&) = default;
};

// Ordered action list transforming one placement into another. Memory-releasing
// actions (Offload, Quantize) come before memory-consuming ones (Fetch,
// Dequantize), each group in ascending (layer, slot) order.
struct ReconfigPlan {
    std::vector<ReconfigAction> actions;
    bytes_t bytes_moved = 0;      // CPU->GPU traffic only
    double est_downtime_s = 0.0;  // bytes_moved / transfer bandwidth
    uint64_t target_seed = 0;     // seed of the destination plan
    friend bool operator==(const ReconfigPlan&, const ReconfigPlan&) = default;
};

// Minimal per-expert action set turning `from` into `to`. The CPU is assumed
// to hold 16-bit master weights for every expert permanently, so Offload and
// Quantize move nothing toward the GPU, a Fetch moves the expert at its
// destination precision, and a Dequantize costs a 16-bit transfer only for an
// expert that stays GPU-resident throughout.
ReconfigPlan diff_plans(const PlacementPlan& from, const PlacementPlan& to,
                        const ModelProfile& profile, const HardwareProfile& hw);

// Replays the action list, checking every action against the evolving state,
// and returns the transformed plan with the swap slot recomputed. When
// `budget` is given, the footprint is also checked against it after the
// releasing group has finished (every state from the first consuming action
// on, plus the final state).
PlacementPlan apply(const PlacementPlan& plan, const ReconfigPlan& actions,
                    const ModelProfile& profile, const HardwareProfile* budget = nullptr);

// (bytes moved toward the GPU, estimated downtime in seconds), recomputed
// from the action list alone.
std::pair<bytes_t, double> estimate_cost(const ReconfigPlan& actions, const ModelProfile& profile,
                                         const HardwareProfile& hw);

}  // namespace moeserve
