// SPDX-License-Identifier: Apache-2.0
#include "moeserve/pareto.hpp"

#include <algorithm>
#include <numeric>

#include "ini.hpp"
#include "moeserve/errors.hpp"

namespace moeserve {

namespace {

void validate_anchors(const QualityAnchors& anchors) {
    if (!(anchors.ppl_all16 > 1.0) || !(anchors.ppl_all4 > 1.0))
        throw ValidationError("perplexity anchors must be > 1");
    if (anchors.ppl_all4 < anchors.ppl_all16)
        throw ValidationError("ppl_all4 must be >= ppl_all16 (the surrogate assumes quantization "
                              "does not improve perplexity)");
}

}  // namespace

QualityAnchors anchors_wikitext2() { return {"wikitext2", 3.81, 4.00}; }
QualityAnchors anchors_ptb() { return {"ptb", 13.59, 14.17}; }
QualityAnchors anchors_c4() { return {"c4", 7.24, 7.40}; }

std::optional<QualityAnchors> builtin_anchors(std::string_view name) {
    if (name == "wikitext2") return anchors_wikitext2();
    if (name == "ptb") return anchors_ptb();
    if (name == "c4") return anchors_c4();
    return std::nullopt;
}

QualityAnchors load_anchors(std::string_view document, const QualityAnchors& fallback) {
    const auto entries = ini::parse(document);
    QualityAnchors anchors = fallback;
    for (const auto& e : entries) {
        if (e.section != "quality" || e.key != "dataset") continue;
        if (const auto builtin = builtin_anchors(e.value))
            anchors = *builtin;
        else
            anchors.dataset = e.value;
    }
    for (const auto& e : entries) {
        if (e.section != "quality" || e.key == "dataset") continue;
        if (e.key == "ppl_all16")
            anchors.ppl_all16 = ini::parse_double_value(e);
        else if (e.key == "ppl_all4")
            anchors.ppl_all4 = ini::parse_double_value(e);
        else
            ini::fail_line(e.line, "unknown key '" + e.key + "' in [quality]");
    }
    validate_anchors(anchors);
    return anchors;
}

double ppl_estimate(int n4, const QualityAnchors& anchors, int num_e) {
    validate_anchors(anchors);
    if (num_e < 1) throw ValidationError("num_e must be >= 1");
    if (n4 < 0 || n4 > num_e)
        throw ValidationError("n4 out of range: " + std::to_string(n4) + " (expert count " +
                              std::to_string(num_e) + ")");
    const double t = static_cast<double>(n4) / static_cast<double>(num_e);
    return (1.0 - t) * anchors.ppl_all16 + t * anchors.ppl_all4;
}

int n4_for_budget(double ppl_budget, const QualityAnchors& anchors, int num_e) {
    validate_anchors(anchors);
    if (num_e < 1) throw ValidationError("num_e must be >= 1");
    if (ppl_budget < anchors.ppl_all16)
        throw ValidationError("perplexity budget " + std::to_string(ppl_budget) +
                              " is below the all-16-bit anchor " +
                              std::to_string(anchors.ppl_all16) + " (unreachable quality)");
    // ppl_estimate is monotone non-decreasing in n4.
    int lo = 0, hi = num_e;
    while (lo < hi) {
        const int mid = lo + (hi - lo + 1) / 2;
        if (ppl_estimate(mid, anchors, num_e) <= ppl_budget)
            lo = mid;
        else
            hi = mid - 1;
    }
    return lo;
}

bool dominates(const ParetoPoint& a, const ParetoPoint& b) {
    if (a.throughput_tps < b.throughput_tps) return false;
    if (a.ppl_estimate > b.ppl_estimate) return false;
    if (a.gpu_bytes > b.gpu_bytes) return false;
    return a.throughput_tps > b.throughput_tps || a.ppl_estimate < b.ppl_estimate ||
           a.gpu_bytes < b.gpu_bytes;
}

std::vector<char> frontier_mask(const std::vector<ParetoPoint>& points) {
    const size_t n = points.size();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    // Any dominator of a point sorts strictly before it in this order, so one
    // pass over accepted points suffices (dominance is transitive).
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const ParetoPoint& pa = points[static_cast<size_t>(a)];
        const ParetoPoint& pb = points[static_cast<size_t>(b)];
        if (pa.throughput_tps != pb.throughput_tps) return pa.throughput_tps > pb.throughput_tps;
        if (pa.ppl_estimate != pb.ppl_estimate) return pa.ppl_estimate < pb.ppl_estimate;
        if (pa.gpu_bytes != pb.gpu_bytes) return pa.gpu_bytes < pb.gpu_bytes;
        return a < b;
    });

    std::vector<char> mask(n, 0);
    std::vector<int> accepted;
    for (int index : order) {
        const ParetoPoint& candidate = points[static_cast<size_t>(index)];
        bool is_dominated = false;
        for (int keeper : accepted) {
            if (dominates(points[static_cast<size_t>(keeper)], candidate)) {
                is_dominated = true;
                break;
            }
        }
        if (!is_dominated) {
            mask[static_cast<size_t>(index)] = 1;
            accepted.push_back(index);
        }
    }
    return mask;
}

std::vector<ParetoPoint> pareto_frontier(const std::vector<ParetoPoint>& points) {
    const std::vector<char> mask = frontier_mask(points);
    std::vector<int> kept;
    for (size_t i = 0; i < points.size(); ++i)
        if (mask[i]) kept.push_back(static_cast<int>(i));
    std::stable_sort(kept.begin(), kept.end(), [&](int a, int b) {
        return points[static_cast<size_t>(a)].throughput_tps >
               points[static_cast<size_t>(b)].throughput_tps;
    });
    std::vector<ParetoPoint> frontier;
    frontier.reserve(kept.size());
    for (int index : kept) frontier.push_back(points[static_cast<size_t>(index)]);
    return frontier;
}

}  // namespace moeserve
