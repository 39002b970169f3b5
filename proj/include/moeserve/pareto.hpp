// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "moeserve/profiles.hpp"

namespace moeserve {

// Perplexity endpoints of one evaluation dataset: all experts 16-bit vs all
// experts 4-bit (non-expert layers stay 16-bit in both).
struct QualityAnchors {
    std::string dataset;
    double ppl_all16 = 0.0;
    double ppl_all4 = 0.0;
};

QualityAnchors anchors_wikitext2();
QualityAnchors anchors_ptb();
QualityAnchors anchors_c4();
std::optional<QualityAnchors> builtin_anchors(std::string_view name);

// Anchors from an optional [quality] config section (keys: dataset,
// ppl_all16, ppl_all4); `fallback` when the section is absent.
QualityAnchors load_anchors(std::string_view document, const QualityAnchors& fallback);

// Linear surrogate between the two anchors. An estimate by construction: the
// measured curve is not perfectly monotone, but only its endpoints are
// published, so interpolation is the honest middle ground.
double ppl_estimate(int n4, const QualityAnchors& anchors, int num_e);

// Largest n4 whose estimate stays within the perplexity budget, clamped to
// [0, num_e]. Throws when the budget is below the all-16-bit anchor.
int n4_for_budget(double ppl_budget, const QualityAnchors& anchors, int num_e);

struct ParetoPoint {
    bytes_t budget = 0;
    int n4 = 0;
    double throughput_tps = 0.0;
    double ppl_estimate = 0.0;
    bytes_t gpu_bytes = 0;
};

// a dominates b when a is >= in throughput, <= in perplexity and <= in GPU
// bytes, strictly better in at least one.
bool dominates(const ParetoPoint& a, const ParetoPoint& b);

// Per-input-point flag: true when no other point dominates it.
std::vector<char> frontier_mask(const std::vector<ParetoPoint>& points);

// Non-dominated points sorted by throughput descending, input order preserved
// among equal throughputs.
std::vector<ParetoPoint> pareto_frontier(const std::vector<ParetoPoint>& points);

}  // namespace moeserve
