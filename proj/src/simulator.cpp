// SPDX-License-Identifier: Apache-2.0
#include "moeserve/simulator.hpp"

#include <cmath>
#include <list>
#include <string>
#include <unordered_map>

#include "moeserve/errors.hpp"

namespace moeserve {

namespace {

struct EventCosts {
    int64_t compute_ns[2];   // indexed by precision: [P4, P16]
    int64_t transfer_ns[2];
    bytes_t size[2];
    int64_t nonexpert_ns;
};

int precision_index(Precision p) { return p == Precision::P4 ? 0 : 1; }

EventCosts make_costs(const ModelProfile& profile, const HardwareProfile& hw) {
    EventCosts c{};
    c.size[0] = expert_size(profile, Precision::P4);
    c.size[1] = expert_size(profile, Precision::P16);
    for (int i = 0; i < 2; ++i)
        c.transfer_ns[i] = std::llround(static_cast<double>(c.size[i]) * 1e9 /
                                        hw.transfer_bw_bytes_per_s);
    c.compute_ns[1] = std::llround(profile.compute_latency16_s * 1e9);
    c.compute_ns[0] = std::llround(profile.compute_latency16_s * profile.compute_penalty4 * 1e9);
    c.nonexpert_ns = std::llround(profile.nonexpert_latency_s * 1e9);
    return c;
}

// Fixed-capacity LRU over expert indices; capacity counted in slots.
class LruCache {
  public:
    explicit LruCache(int capacity) : capacity_(capacity) {}

    bool touch(int expert) {
        const auto it = index_.find(expert);
        if (it == index_.end()) return false;
        order_.splice(order_.begin(), order_, it->second);
        return true;
    }

    void insert(int expert) {
        order_.push_front(expert);
        index_[expert] = order_.begin();
        if (static_cast<int>(index_.size()) > capacity_) {
            index_.erase(order_.back());
            order_.pop_back();
        }
    }

  private:
    int capacity_;
    std::list<int> order_;
    std::unordered_map<int, std::list<int>::iterator> index_;
};

}  // namespace

SimReport simulate(const PlacementPlan& plan, const GatingTrace& trace,
                   const ModelProfile& profile, const HardwareProfile& hw,
                   const ResidencyPolicy& policy) {
    if (trace.profile_fingerprint != profile_fingerprint(profile))
        throw ValidationError("trace fingerprint " + fingerprint_hex(trace.profile_fingerprint) +
                              " does not match the active profile " +
                              fingerprint_hex(profile_fingerprint(profile)));
    if (trace.num_layers != profile.num_layers ||
        trace.experts_per_layer != profile.experts_per_layer || trace.top_k != profile.top_k)
        throw ValidationError("trace dimensions do not match the profile");
    if (static_cast<int>(plan.entries.size()) != profile.num_experts())
        throw ValidationError("plan covers " + std::to_string(plan.entries.size()) +
                              " experts, profile defines " + std::to_string(profile.num_experts()));
    if (policy.kind == ResidencyPolicy::Kind::Lru && policy.capacity_slots < 1)
        throw ValidationError("LRU capacity must be >= 1");

    const EventCosts costs = make_costs(profile, hw);
    const bool use_lru = policy.kind == ResidencyPolicy::Kind::Lru;
    LruCache cache(use_lru ? policy.capacity_slots : 1);

    SimReport report;
    report.tokens = trace.tokens;
    const int32_t* slot = trace.slots.data();
    for (int t = 0; t < trace.tokens; ++t) {
        report.nonexpert_ns += costs.nonexpert_ns;
        for (int l = 0; l < trace.num_layers; ++l) {
            const int base = l * trace.experts_per_layer;
            for (int i = 0; i < trace.top_k; ++i) {
                const int expert = base + *slot++;
                const ExpertState st = plan.entries[static_cast<size_t>(expert)];
                const int pi = precision_index(st.precision);
                ++report.activations;
                bool resident = st.location == Location::GPU;
                if (!resident && use_lru) resident = cache.touch(expert);
                if (resident) {
                    ++report.hits;
                } else {
                    report.transfer_ns += costs.transfer_ns[pi];
                    report.bytes_transferred += costs.size[pi];
                    if (use_lru) cache.insert(expert);
                }
                report.compute_ns += costs.compute_ns[pi];
            }
        }
    }
    return report;
}

double expected_throughput(const PlacementPlan& plan, const ModelProfile& profile,
                           const HardwareProfile& hw) {
    if (static_cast<int>(plan.entries.size()) != profile.num_experts())
        throw ValidationError("plan covers " + std::to_string(plan.entries.size()) +
                              " experts, profile defines " + std::to_string(profile.num_experts()));
    const EventCosts costs = make_costs(profile, hw);
    const double select_prob =
        static_cast<double>(profile.top_k) / static_cast<double>(profile.experts_per_layer);

    double token_ns = static_cast<double>(costs.nonexpert_ns);
    for (int l = 0; l < profile.num_layers; ++l) {
        int64_t layer_compute_ns = 0;
        int64_t layer_transfer_ns = 0;
        for (int s = 0; s < profile.experts_per_layer; ++s) {
            const ExpertState st =
                plan.entries[static_cast<size_t>(l * profile.experts_per_layer + s)];
            const int pi = precision_index(st.precision);
            layer_compute_ns += costs.compute_ns[pi];
            if (st.location == Location::CPU) layer_transfer_ns += costs.transfer_ns[pi];
        }
        token_ns += select_prob * static_cast<double>(layer_compute_ns + layer_transfer_ns);
    }
    return 1e9 / token_ns;
}

std::vector<SweepEntry> sweep_memory(const std::vector<bytes_t>& budgets, const TaskRequest& task,
                                     const ModelProfile& profile, const HardwareProfile& hw_template,
                                     int tokens, uint64_t seed) {
    if (budgets.empty()) throw ValidationError("budget list must not be empty");
    const GatingTrace trace = generate_trace(profile, tokens, seed);

    std::vector<SweepEntry> entries;
    entries.reserve(budgets.size());
    for (bytes_t budget : budgets) {
        HardwareProfile hw = hw_template;
        hw.gpu_mem_bytes = budget;
        SweepEntry entry;
        entry.budget = budget;
        try {
            const PlacementPlan plan = make_plan(task, hw, profile);
            entry.summary = summarize(plan, profile, hw);
            entry.report = simulate(plan, trace, profile, hw, ResidencyPolicy::static_policy());
            entry.feasible = true;
        } catch (const InfeasibleError&) {
            entry.feasible = false;
        }
        entries.push_back(entry);
    }
    return entries;
}

}  // namespace moeserve
