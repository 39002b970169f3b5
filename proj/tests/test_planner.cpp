// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "moeserve/errors.hpp"
#include "moeserve/planner.hpp"
#include "moeserve/rng.hpp"

using namespace moeserve;

namespace {

const ModelProfile kMixtral = mixtral_sec41();

HardwareProfile hw_with(bytes_t budget) {
    HardwareProfile hw = default_hardware();
    hw.gpu_mem_bytes = budget;
    return hw;
}

int count_p4(const PlacementPlan& plan) {
    int n = 0;
    for (const auto& e : plan.entries) n += e.precision == Precision::P4 ? 1 : 0;
    return n;
}

int count_gpu(const PlacementPlan& plan) {
    int n = 0;
    for (const auto& e : plan.entries) n += e.location == Location::GPU ? 1 : 0;
    return n;
}

// Tiny 2x2 model with distinguishable sizes for hand-run greedy checks.
ModelProfile toy_profile() {
    ModelProfile p;
    p.num_layers = 2;
    p.experts_per_layer = 2;
    p.top_k = 1;
    p.size_nonexpert_bytes = 1000;
    p.size_expert16_bytes = 400;  // p4 = 100
    p.quant_ratio = 4.0;
    p.compute_latency16_s = 0;
    p.nonexpert_latency_s = 0;
    return p;
}

}  // namespace

TEST_CASE("experts_16 follows the budget split") {
    CHECK(num_experts_16(24'000'000'000, kMixtral) == 0);
    CHECK(num_experts_16(24'664'000'000, kMixtral) == 0);  // boundary: not strictly above
    CHECK(num_experts_16(30'000'000'000, kMixtral) == 21);
    CHECK(num_experts_16(120'000'000'000, kMixtral) == 256);  // clamped from 378
}

TEST_CASE("experts_16 is non-decreasing and zero below the all-4-bit point") {
    const bytes_t all4 = kMixtral.size_nonexpert_bytes +
                         bytes_t{kMixtral.num_experts()} * expert_size(kMixtral, Precision::P4);
    const bytes_t upgrade = 3 * expert_size(kMixtral, Precision::P4);
    int prev = 0;
    for (bytes_t mem = 1'000'000'000; mem <= 130'000'000'000; mem += 499'999'999) {
        const int n16 = num_experts_16(mem, kMixtral);
        CHECK(n16 >= prev);
        if (mem <= all4) CHECK(n16 == 0);
        if (mem >= all4 + upgrade) CHECK(n16 >= 1);
        prev = n16;
    }
}

TEST_CASE("quantization assignment is a uniform deterministic subset") {
    CHECK(assign_quantization(0, kMixtral, 7).empty());
    CHECK(assign_quantization(256, kMixtral, 7).size() == 256);

    const auto a = assign_quantization(128, kMixtral, 7);
    const auto b = assign_quantization(128, kMixtral, 7);
    const auto c = assign_quantization(128, kMixtral, 8);
    CHECK(a == b);
    CHECK(a != c);
    CHECK(a.size() == 128);
    const std::set<ExpertId> unique(a.begin(), a.end());
    CHECK(unique.size() == 128);
    CHECK(std::is_sorted(a.begin(), a.end()));
    for (const ExpertId id : a) {
        CHECK(id.layer >= 0);
        CHECK(id.layer < 32);
        CHECK(id.slot >= 0);
        CHECK(id.slot < 8);
    }

    CHECK_THROWS_AS((void)assign_quantization(-1, kMixtral, 0), ValidationError);
    CHECK_THROWS_AS((void)assign_quantization(257, kMixtral, 0), ValidationError);
}

TEST_CASE("throughput plan at 30 GB upgrades 21 experts and stays resident") {
    const TaskRequest task{Preference::Throughput, std::nullopt, 0};
    const PlacementPlan plan = plan_throughput(task, hw_with(30'000'000'000), kMixtral);
    CHECK(count_p4(plan) == 235);
    CHECK(count_gpu(plan) == 256);
    CHECK(plan.swap_slot_bytes == 0);
    CHECK(gpu_footprint(plan, kMixtral) == 29'956'000'000);
    CHECK(validate_plan(plan, hw_with(30'000'000'000), kMixtral).empty());
}

TEST_CASE("throughput plan at 20 GB goes all-4-bit with partial residency") {
    const TaskRequest task{Preference::Throughput, std::nullopt, 0};
    const PlacementPlan plan = plan_throughput(task, hw_with(20'000'000'000), kMixtral);
    CHECK(count_p4(plan) == 256);
    CHECK(count_gpu(plan) == 199);
    CHECK(plan.swap_slot_bytes == 84'000'000);
    CHECK(validate_plan(plan, hw_with(20'000'000'000), kMixtral).empty());
}

TEST_CASE("throughput plan below the non-expert size is infeasible") {
    const TaskRequest task{Preference::Throughput, std::nullopt, 0};
    CHECK_THROWS_AS((void)plan_throughput(task, hw_with(2'000'000'000), kMixtral),
                    InfeasibleError);
}

TEST_CASE("quality plans follow the requested 4-bit count") {
    TaskRequest task{Preference::Quality, 256, 0};
    const PlacementPlan all4 = plan_quality(task, hw_with(20'000'000'000), kMixtral);
    CHECK(count_p4(all4) == 256);
    CHECK(count_gpu(all4) == 199);
    CHECK(all4.swap_slot_bytes == 84'000'000);

    task.n4_target = 0;
    const PlacementPlan resident16 = plan_quality(task, hw_with(94'000'000'000), kMixtral);
    CHECK(count_p4(resident16) == 0);
    CHECK(count_gpu(resident16) == 256);
    CHECK(resident16.swap_slot_bytes == 0);
    CHECK(gpu_footprint(resident16, kMixtral) == 89'176'000'000);

    const PlacementPlan partial16 = plan_quality(task, hw_with(50'000'000'000), kMixtral);
    CHECK(count_gpu(partial16) == 138);
    CHECK(partial16.swap_slot_bytes == 336'000'000);

    task.n4_target = std::nullopt;
    CHECK_THROWS_AS((void)plan_quality(task, hw_with(50'000'000'000), kMixtral), ValidationError);
    task.n4_target = 300;
    CHECK_THROWS_AS((void)plan_quality(task, hw_with(50'000'000'000), kMixtral), ValidationError);
}

TEST_CASE("greedy residency on a toy model, by hand") {
    const ModelProfile toy = toy_profile();  // experts (0,0) (0,1) (1,0) (1,1)

    SUBCASE("everything fits") {
        const std::vector<Precision> prec(4, Precision::P4);
        // 1000 + 4 * 100 = 1400
        const PlacementPlan plan = assign_locations(prec, hw_with(1400), toy);
        CHECK(count_gpu(plan) == 4);
        CHECK(plan.swap_slot_bytes == 0);
    }

    SUBCASE("4-bit experts beat 16-bit experts to the GPU") {
        // (0,0) and (1,0) are 16-bit; (0,1) and (1,1) are 4-bit.
        const std::vector<Precision> prec{Precision::P16, Precision::P4, Precision::P16,
                                          Precision::P4};
        // Both P4 (200) + one P16 (400) + swap for the remaining P16 (400) -> 1000 + 1000.
        const PlacementPlan plan = assign_locations(prec, hw_with(2000), toy);
        CHECK(plan.entries[1].location == Location::GPU);
        CHECK(plan.entries[3].location == Location::GPU);
        CHECK(plan.entries[0].location == Location::GPU);  // first P16 in (layer, slot) order
        CHECK(plan.entries[2].location == Location::CPU);
        CHECK(plan.swap_slot_bytes == 400);
    }

    SUBCASE("k lowest (layer, slot) 4-bit experts win a tight budget") {
        const std::vector<Precision> prec(4, Precision::P4);
        // Room for two experts plus the swap slot: 1000 + 2*100 + 100.
        const PlacementPlan plan = assign_locations(prec, hw_with(1300), toy);
        CHECK(count_gpu(plan) == 2);
        CHECK(plan.entries[0].location == Location::GPU);
        CHECK(plan.entries[1].location == Location::GPU);
        CHECK(plan.entries[2].location == Location::CPU);
        CHECK(plan.entries[3].location == Location::CPU);
        CHECK(plan.swap_slot_bytes == 100);
    }

    SUBCASE("swap slot sizing is a fixed point across the residency cut") {
        // Mixed precisions, budget that admits all P4 plus swap for a P16.
        const std::vector<Precision> prec{Precision::P4, Precision::P16, Precision::P4,
                                          Precision::P16};
        const PlacementPlan plan = assign_locations(prec, hw_with(1600), toy);
        // P4s resident (200), swap must hold a 16-bit expert: 1000+200+400 = 1600.
        CHECK(count_gpu(plan) == 2);
        CHECK(plan.swap_slot_bytes == 400);
        CHECK(gpu_footprint(plan, toy) == 1600);
    }
}

TEST_CASE("gpu_footprint counts residents, non-expert layers and swap") {
    const TaskRequest task{Preference::Quality, 256, 0};
    const PlacementPlan all_cpu = plan_quality(task, hw_with(3'244'000'000), kMixtral);
    CHECK(count_gpu(all_cpu) == 0);
    CHECK(gpu_footprint(all_cpu, kMixtral) ==
          kMixtral.size_nonexpert_bytes + all_cpu.swap_slot_bytes);

    PlacementPlan empty;
    CHECK(gpu_footprint(empty, kMixtral) == kMixtral.size_nonexpert_bytes);
}

TEST_CASE("validate_plan reports each violation") {
    const HardwareProfile hw = hw_with(30'000'000'000);
    const TaskRequest task{Preference::Throughput, std::nullopt, 0};
    PlacementPlan plan = plan_throughput(task, hw, kMixtral);
    CHECK(validate_plan(plan, hw, kMixtral).empty());

    SUBCASE("footprint overshoot is named in bytes") {
        const HardwareProfile tight = hw_with(gpu_footprint(plan, kMixtral) - 1);
        const auto violations = validate_plan(plan, tight, kMixtral);
        REQUIRE(violations.size() == 1);
        CHECK(violations[0].find("exceeds budget") != std::string::npos);
        CHECK(violations[0].find("by 1 B") != std::string::npos);
    }

    SUBCASE("missing swap slot with CPU residents") {
        plan.entries[0].location = Location::CPU;  // swap stays 0: violation
        const auto violations = validate_plan(plan, hw, kMixtral);
        REQUIRE(!violations.empty());
        CHECK(violations[0].find("swap_slot_bytes") != std::string::npos);
    }

    SUBCASE("wrong entry count") {
        plan.entries.pop_back();
        plan.swap_slot_bytes = required_swap_bytes(plan, kMixtral);
        const auto violations = validate_plan(plan, hw, kMixtral);
        REQUIRE(!violations.empty());
        CHECK(violations[0].find("entries") != std::string::npos);
    }
}

TEST_CASE("property: planner output always passes validation") {
    Xoshiro256 rng(2024);
    int produced = 0;
    for (int it = 0; it < 1200; ++it) {
        const bytes_t budget = 2'000'000'000 + static_cast<bytes_t>(rng.bounded(98'000'000'000));
        const uint64_t seed = rng.next();
        TaskRequest task;
        task.seed = seed;
        if (rng.bounded(2) == 0) {
            task.preference = Preference::Throughput;
        } else {
            task.preference = Preference::Quality;
            task.n4_target = static_cast<int>(rng.bounded(257));
        }
        const HardwareProfile hw = hw_with(budget);
        try {
            const PlacementPlan plan = make_plan(task, hw, kMixtral);
            const auto violations = validate_plan(plan, hw, kMixtral);
            if (!violations.empty()) {
                CAPTURE(budget);
                CAPTURE(violations[0]);
                REQUIRE(violations.empty());
            }
            ++produced;
        } catch (const InfeasibleError&) {
            // below the non-expert + swap floor; nothing to validate
        }
    }
    CHECK(produced >= 1000);
}

TEST_CASE("property: a 16-bit expert is resident only when every 4-bit expert is") {
    Xoshiro256 rng(99);
    for (int it = 0; it < 1000; ++it) {
        const bytes_t budget = 4'000'000'000 + static_cast<bytes_t>(rng.bounded(96'000'000'000));
        TaskRequest task{Preference::Quality, static_cast<int>(rng.bounded(257)), rng.next()};
        const PlacementPlan plan = plan_quality(task, hw_with(budget), kMixtral);
        bool any_p4_on_cpu = false;
        bool any_p16_on_gpu = false;
        for (const auto& e : plan.entries) {
            if (e.precision == Precision::P4 && e.location == Location::CPU) any_p4_on_cpu = true;
            if (e.precision == Precision::P16 && e.location == Location::GPU) any_p16_on_gpu = true;
        }
        CHECK(!(any_p16_on_gpu && any_p4_on_cpu));
    }
}

TEST_CASE("property: throughput plans are maximal and upgrade-consistent") {
    Xoshiro256 rng(555);
    for (int it = 0; it < 1000; ++it) {
        const bytes_t budget = 3'300'000'000 + static_cast<bytes_t>(rng.bounded(96'000'000'000));
        const TaskRequest task{Preference::Throughput, std::nullopt, rng.next()};
        const HardwareProfile hw = hw_with(budget);
        const PlacementPlan plan = plan_throughput(task, hw, kMixtral);

        // 16-bit upgrades only happen when everything is resident.
        if (count_p4(plan) < 256) CHECK(count_gpu(plan) == 256);

        // Moving any single CPU expert to the GPU must overflow the budget.
        for (size_t i = 0; i < plan.entries.size(); ++i) {
            if (plan.entries[i].location != Location::CPU) continue;
            PlacementPlan moved = plan;
            moved.entries[i].location = Location::GPU;
            moved.swap_slot_bytes = required_swap_bytes(moved, kMixtral);
            CHECK(gpu_footprint(moved, kMixtral) > hw.gpu_mem_bytes);
        }
    }
}

TEST_CASE("property: planning is bit-deterministic") {
    Xoshiro256 rng(31337);
    for (int it = 0; it < 200; ++it) {
        const bytes_t budget = 3'300'000'000 + static_cast<bytes_t>(rng.bounded(90'000'000'000));
        TaskRequest task;
        task.seed = rng.next();
        if (rng.bounded(2) == 0) {
            task.preference = Preference::Throughput;
        } else {
            task.preference = Preference::Quality;
            task.n4_target = static_cast<int>(rng.bounded(257));
        }
        const PlacementPlan a = make_plan(task, hw_with(budget), kMixtral);
        const PlacementPlan b = make_plan(task, hw_with(budget), kMixtral);
        CHECK(a == b);
    }
}
