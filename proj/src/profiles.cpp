// SPDX-License-Identifier: Apache-2.0
#include "moeserve/profiles.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "ini.hpp"
#include "moeserve/errors.hpp"

namespace moeserve {

namespace {

using ini::ConfigEntry;
using ini::fail_line;
using ini::parse_double_value;
using ini::parse_int_value;
using ini::trim;

constexpr double kCalibratedTps = 13.0;
constexpr double kNonexpertShare = 0.1;

bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (std::tolower(static_cast<unsigned char>(a[i])) !=
            std::tolower(static_cast<unsigned char>(b[i])))
            return false;
    return true;
}

bytes_t parse_size_value(const ConfigEntry& e) {
    try {
        return parse_size(e.value);
    } catch (const ParseError& err) {
        fail_line(e.line, "key '" + e.key + "': " + err.what());
    }
}

// Bandwidth accepts the size suffixes (meaning bytes per second) or a bare
// number of bytes per second, which may be fractional.
double parse_bandwidth_value(const ConfigEntry& e) {
    const std::string_view s = trim(e.value);
    if (!s.empty() && std::isalpha(static_cast<unsigned char>(s.back())))
        return static_cast<double>(parse_size_value(e));
    return parse_double_value(e);
}

bytes_t precision_divisor(NonexpertPrecision precision) {
    switch (precision) {
        case NonexpertPrecision::P4: return 4;
        case NonexpertPrecision::P8: return 2;
        case NonexpertPrecision::P16: return 1;
    }
    throw ValidationError("unknown precision");
}

}  // namespace

ModelProfile mixtral_sec41() {
    return ModelProfile{};
}

ModelProfile mixtral_table1() {
    ModelProfile p;
    p.size_nonexpert_bytes = 4'090'000'000;
    p.size_expert16_bytes = 352'031'250;
    return p;
}

HardwareProfile default_hardware() {
    return HardwareProfile{};
}

void validate_profile(const ModelProfile& p) {
    if (p.num_layers < 1)
        throw ValidationError("num_layers must be >= 1 (got " + std::to_string(p.num_layers) + ")");
    if (p.experts_per_layer < 1)
        throw ValidationError("experts_per_layer must be >= 1 (got " +
                              std::to_string(p.experts_per_layer) + ")");
    if (p.top_k < 1 || p.top_k > p.experts_per_layer)
        throw ValidationError("top_k must be in [1, experts_per_layer] (got " +
                              std::to_string(p.top_k) + " with experts_per_layer " +
                              std::to_string(p.experts_per_layer) + ")");
    if (p.size_nonexpert_bytes <= 0)
        throw ValidationError("size_nonexpert_bytes must be > 0");
    if (p.size_expert16_bytes <= 0)
        throw ValidationError("size_expert16_bytes must be > 0");
    if (!(p.quant_ratio > 1.0))
        throw ValidationError("quant_ratio must be > 1");
    if (!(p.compute_penalty4 >= 1.0))
        throw ValidationError("compute_penalty4 must be >= 1");
    if (!(p.compute_latency16_s >= 0.0))
        throw ValidationError("compute_latency16_s must be >= 0");
    if (!(p.nonexpert_latency_s >= 0.0))
        throw ValidationError("nonexpert_latency_s must be >= 0");
}

void validate_hardware(const HardwareProfile& hw) {
    if (hw.gpu_mem_bytes <= 0)
        throw ValidationError("gpu_mem_bytes must be > 0");
    if (!(hw.transfer_bw_bytes_per_s > 0.0))
        throw ValidationError("transfer_bw_bytes_per_s must be > 0");
}

void validate_task(const TaskRequest& task, const ModelProfile& profile) {
    if (task.preference == Preference::Quality) {
        if (!task.n4_target)
            throw ValidationError("quality request requires n4_target");
        if (*task.n4_target < 0 || *task.n4_target > profile.num_experts())
            throw ValidationError("n4_target out of range: " + std::to_string(*task.n4_target) +
                                  " (expert count " + std::to_string(profile.num_experts()) + ")");
    }
}

bytes_t parse_size(std::string_view text) {
    std::string_view s = trim(text);
    if (s.empty()) throw ParseError("empty size value");
    double multiplier = 1.0;
    if (s.size() >= 2 && iequals(s.substr(s.size() - 2), "GB")) {
        multiplier = 1e9;
        s.remove_suffix(2);
    } else if (s.size() >= 2 && iequals(s.substr(s.size() - 2), "MB")) {
        multiplier = 1e6;
        s.remove_suffix(2);
    } else if (!s.empty() && (s.back() == 'B' || s.back() == 'b')) {
        s.remove_suffix(1);
    } else if (!s.empty() && std::isalpha(static_cast<unsigned char>(s.back()))) {
        throw ParseError("unknown size suffix in '" + std::string(text) + "' (expected B, MB or GB)");
    }
    s = trim(s);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(value))
        throw ParseError("malformed size '" + std::string(text) + "'");
    if (value < 0.0) throw ParseError("negative size '" + std::string(text) + "'");
    const double scaled = value * multiplier;
    if (scaled > 9.0e18) throw ParseError("size out of range '" + std::string(text) + "'");
    return static_cast<bytes_t>(std::llround(scaled));
}

std::pair<ModelProfile, HardwareProfile> load_profiles(std::string_view document) {
    const auto entries = ini::parse(document);

    ModelProfile model = mixtral_sec41();
    for (const auto& e : entries) {
        if (e.section != "model" || e.key != "builtin") continue;
        if (e.value == "mixtral-sec41") {
            model = mixtral_sec41();
        } else if (e.value == "mixtral-table1") {
            model = mixtral_table1();
        } else {
            fail_line(e.line, "unknown builtin profile '" + e.value +
                                  "' (known: mixtral-sec41, mixtral-table1)");
        }
    }

    HardwareProfile hw = default_hardware();
    bool compute_latency_given = false;
    bool nonexpert_latency_given = false;
    for (const auto& e : entries) {
        if (e.section == "model") {
            if (e.key == "builtin") continue;
            if (e.key == "num_layers") model.num_layers = parse_int_value(e);
            else if (e.key == "experts_per_layer") model.experts_per_layer = parse_int_value(e);
            else if (e.key == "top_k") model.top_k = parse_int_value(e);
            else if (e.key == "size_nonexpert_bytes") model.size_nonexpert_bytes = parse_size_value(e);
            else if (e.key == "size_expert16_bytes") model.size_expert16_bytes = parse_size_value(e);
            else if (e.key == "quant_ratio") model.quant_ratio = parse_double_value(e);
            else if (e.key == "compute_latency16_s") {
                model.compute_latency16_s = parse_double_value(e);
                compute_latency_given = true;
            } else if (e.key == "compute_penalty4") model.compute_penalty4 = parse_double_value(e);
            else if (e.key == "nonexpert_latency_s") {
                model.nonexpert_latency_s = parse_double_value(e);
                nonexpert_latency_given = true;
            } else {
                fail_line(e.line, "unknown key '" + e.key + "' in [model]");
            }
        } else if (e.section == "hardware") {
            if (e.key == "gpu_mem_bytes") hw.gpu_mem_bytes = parse_size_value(e);
            else if (e.key == "transfer_bw_bytes_per_s") hw.transfer_bw_bytes_per_s = parse_bandwidth_value(e);
            else fail_line(e.line, "unknown key '" + e.key + "' in [hardware]");
        } else if (e.section == "quality") {
            // consumed by load_anchors
        } else {
            fail_line(e.line, "unknown section [" + e.section + "]");
        }
    }

    // Keep the throughput calibration consistent when the architecture is
    // overridden without explicit latencies.
    if (model.num_layers >= 1 && model.top_k >= 1) {
        if (!compute_latency_given)
            model.compute_latency16_s =
                (1.0 - kNonexpertShare) /
                (kCalibratedTps * model.num_layers * model.top_k);
        if (!nonexpert_latency_given)
            model.nonexpert_latency_s = kNonexpertShare / kCalibratedTps;
    }

    validate_profile(model);
    validate_hardware(hw);
    return {model, hw};
}

std::pair<ModelProfile, HardwareProfile> load_profiles_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_profiles(buf.str());
}

bytes_t expert_size(const ModelProfile& profile, Precision precision) {
    if (precision == Precision::P16) return profile.size_expert16_bytes;
    return static_cast<bytes_t>(
        std::floor(static_cast<double>(profile.size_expert16_bytes) / profile.quant_ratio));
}

bytes_t model_size(const ModelProfile& profile, int n4, NonexpertPrecision nonexpert_precision) {
    const int num_e = profile.num_experts();
    if (n4 < 0 || n4 > num_e)
        throw ValidationError("n4 out of range: " + std::to_string(n4) + " (expert count " +
                              std::to_string(num_e) + ")");
    return profile.size_nonexpert_bytes / precision_divisor(nonexpert_precision) +
           static_cast<bytes_t>(n4) * expert_size(profile, Precision::P4) +
           static_cast<bytes_t>(num_e - n4) * expert_size(profile, Precision::P16);
}

bytes_t uniform_model_size(const ModelProfile& profile, NonexpertPrecision precision) {
    const bytes_t div = precision_divisor(precision);
    return profile.size_nonexpert_bytes / div +
           static_cast<bytes_t>(profile.num_experts()) * (profile.size_expert16_bytes / div);
}

uint64_t profile_fingerprint(const ModelProfile& p) {
    char buf[320];
    std::snprintf(buf, sizeof buf, "%d|%d|%d|%lld|%lld|%.17g|%.17g|%.17g|%.17g",
                  p.num_layers, p.experts_per_layer, p.top_k,
                  static_cast<long long>(p.size_nonexpert_bytes),
                  static_cast<long long>(p.size_expert16_bytes), p.quant_ratio,
                  p.compute_latency16_s, p.compute_penalty4, p.nonexpert_latency_s);
    uint64_t h = 14695981039346656037ULL;
    for (const char* c = buf; *c; ++c) {
        h ^= static_cast<unsigned char>(*c);
        h *= 1099511628211ULL;
    }
    return h;
}

std::string fingerprint_hex(uint64_t fingerprint) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fingerprint));
    return buf;
}

}  // namespace moeserve
