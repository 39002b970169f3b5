// SPDX-License-Identifier: Apache-2.0
#include "moeserve/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "moeserve/errors.hpp"

namespace moeserve {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr const char* kPlanFormat = "moeserve.plan.v1";
constexpr const char* kReconfigFormat = "moeserve.reconfig.v1";

ordered_json parse_json(std::string_view document, const char* what) {
    try {
        return ordered_json::parse(document);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string(what) + ": " + e.what());
    }
}

void check_format(const ordered_json& j, const char* expected, const char* what) {
    if (!j.is_object() || !j.contains("format") || j["format"] != expected)
        throw ParseError(std::string(what) + ": missing or wrong format marker (expected '" +
                         expected + "')");
}

void check_fingerprint(const ordered_json& j, const ModelProfile& profile, const char* what) {
    const std::string expected = fingerprint_hex(profile_fingerprint(profile));
    const std::string got = j.value("profile_fingerprint", std::string());
    if (got != expected)
        throw ValidationError(std::string(what) + " was built for a different profile (fingerprint " +
                              got + ", expected " + expected + ")");
}

const char* precision_name(Precision p) { return p == Precision::P4 ? "p4" : "p16"; }
const char* location_name(Location l) { return l == Location::GPU ? "gpu" : "cpu"; }

Precision precision_from(const std::string& s, const char* what) {
    if (s == "p4") return Precision::P4;
    if (s == "p16") return Precision::P16;
    throw ParseError(std::string(what) + ": unknown precision '" + s + "'");
}

Location location_from(const std::string& s, const char* what) {
    if (s == "gpu") return Location::GPU;
    if (s == "cpu") return Location::CPU;
    throw ParseError(std::string(what) + ": unknown location '" + s + "'");
}

const char* action_name(ActionKind k) {
    switch (k) {
        case ActionKind::Offload: return "offload";
        case ActionKind::Fetch: return "fetch";
        case ActionKind::Quantize: return "quantize";
        case ActionKind::Dequantize: return "dequantize";
    }
    return "?";
}

ActionKind action_from(const std::string& s) {
    if (s == "offload") return ActionKind::Offload;
    if (s == "fetch") return ActionKind::Fetch;
    if (s == "quantize") return ActionKind::Quantize;
    if (s == "dequantize") return ActionKind::Dequantize;
    throw ParseError("reconfig plan: unknown action kind '" + s + "'");
}

void write_text_file(const std::string& text, const std::string& path, const char* what) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError(std::string("cannot open ") + what + " for writing: " + path);
    out << text;
}

std::string read_text_file(const std::string& path, const char* what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(std::string("cannot open ") + what + ": " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

std::string format_double(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", value);
    return buf;
}

std::string write_plan(const PlacementPlan& plan, const ModelProfile& profile) {
    ordered_json j;
    j["format"] = kPlanFormat;
    j["profile_fingerprint"] = fingerprint_hex(profile_fingerprint(profile));
    j["seed"] = plan.seed;
    j["swap_slot_bytes"] = plan.swap_slot_bytes;
    auto experts = ordered_json::array();
    for (size_t i = 0; i < plan.entries.size(); ++i) {
        const ExpertId id = expert_id_at(profile, static_cast<int>(i));
        const ExpertState& st = plan.entries[i];
        experts.push_back(ordered_json::array(
            {id.layer, id.slot, precision_name(st.precision), location_name(st.location)}));
    }
    j["experts"] = std::move(experts);
    return j.dump(2) + "\n";
}

PlacementPlan read_plan(std::string_view document, const ModelProfile& profile) {
    const ordered_json j = parse_json(document, "plan file");
    check_format(j, kPlanFormat, "plan file");
    check_fingerprint(j, profile, "plan");

    const int num_e = profile.num_experts();
    PlacementPlan plan;
    plan.seed = j.value("seed", uint64_t{0});
    plan.swap_slot_bytes = j.value("swap_slot_bytes", bytes_t{0});
    plan.entries.resize(static_cast<size_t>(num_e));
    if (!j.contains("experts") || !j["experts"].is_array())
        throw ParseError("plan file: missing experts array");
    std::vector<char> seen(static_cast<size_t>(num_e), 0);
    for (const auto& row : j["experts"]) {
        if (!row.is_array() || row.size() != 4)
            throw ParseError("plan file: expert rows must be [layer, slot, precision, location]");
        const ExpertId id{row[0].get<int>(), row[1].get<int>()};
        const int index = expert_index(profile, id);
        if (seen[static_cast<size_t>(index)])
            throw ValidationError("plan file: duplicate entry for expert (" +
                                  std::to_string(id.layer) + "," + std::to_string(id.slot) + ")");
        seen[static_cast<size_t>(index)] = 1;
        plan.entries[static_cast<size_t>(index)] = {
            precision_from(row[2].get<std::string>(), "plan file"),
            location_from(row[3].get<std::string>(), "plan file")};
    }
    for (int i = 0; i < num_e; ++i)
        if (!seen[static_cast<size_t>(i)]) {
            const ExpertId id = expert_id_at(profile, i);
            throw ValidationError("plan file: missing entry for expert (" +
                                  std::to_string(id.layer) + "," + std::to_string(id.slot) + ")");
        }
    return plan;
}

void write_plan_file(const PlacementPlan& plan, const ModelProfile& profile,
                     const std::string& path) {
    write_text_file(write_plan(plan, profile), path, "plan file");
}

PlacementPlan read_plan_file(const std::string& path, const ModelProfile& profile) {
    return read_plan(read_text_file(path, "plan file"), profile);
}

std::string write_reconfig(const ReconfigPlan& plan, const ModelProfile& profile) {
    ordered_json j;
    j["format"] = kReconfigFormat;
    j["profile_fingerprint"] = fingerprint_hex(profile_fingerprint(profile));
    j["target_seed"] = plan.target_seed;
    j["bytes_moved"] = plan.bytes_moved;
    j["est_downtime_s"] = plan.est_downtime_s;
    auto actions = ordered_json::array();
    for (const auto& a : plan.actions)
        actions.push_back(ordered_json::array({action_name(a.kind), a.expert.layer, a.expert.slot,
                                               precision_name(a.target_precision),
                                               location_name(a.target_location)}));
    j["actions"] = std::move(actions);
    return j.dump(2) + "\n";
}

ReconfigPlan read_reconfig(std::string_view document, const ModelProfile& profile,
                           const HardwareProfile& hw) {
    const ordered_json j = parse_json(document, "reconfig file");
    check_format(j, kReconfigFormat, "reconfig file");
    check_fingerprint(j, profile, "reconfig plan");

    ReconfigPlan plan;
    plan.target_seed = j.value("target_seed", uint64_t{0});
    if (!j.contains("actions") || !j["actions"].is_array())
        throw ParseError("reconfig file: missing actions array");
    for (const auto& row : j["actions"]) {
        if (!row.is_array() || row.size() != 5)
            throw ParseError(
                "reconfig file: action rows must be [kind, layer, slot, precision, location]");
        ReconfigAction a;
        a.kind = action_from(row[0].get<std::string>());
        a.expert = {row[1].get<int>(), row[2].get<int>()};
        expert_index(profile, a.expert);  // bounds check
        a.target_precision = precision_from(row[3].get<std::string>(), "reconfig file");
        a.target_location = location_from(row[4].get<std::string>(), "reconfig file");
        plan.actions.push_back(a);
    }
    const auto [bytes, downtime] = estimate_cost(plan, profile, hw);
    plan.bytes_moved = bytes;
    plan.est_downtime_s = downtime;
    if (j.contains("bytes_moved") && j["bytes_moved"].get<bytes_t>() != bytes)
        throw ValidationError("reconfig file: stored bytes_moved " +
                              std::to_string(j["bytes_moved"].get<bytes_t>()) +
                              " disagrees with the action list (" + std::to_string(bytes) + ")");
    return plan;
}

void write_reconfig_file(const ReconfigPlan& plan, const ModelProfile& profile,
                         const std::string& path) {
    write_text_file(write_reconfig(plan, profile), path, "reconfig file");
}

ReconfigPlan read_reconfig_file(const std::string& path, const ModelProfile& profile,
                                const HardwareProfile& hw) {
    return read_reconfig(read_text_file(path, "reconfig file"), profile, hw);
}

std::string report_csv(const SimReport& r) {
    std::string out =
        "tokens,total_time_s,throughput_tps,activations,hits,hit_rate,bytes_transferred,"
        "transfer_time_s,compute_time_s,nonexpert_time_s\n";
    out += std::to_string(r.tokens) + ',' + format_double(r.total_time_s()) + ',' +
           format_double(r.throughput_tps()) + ',' + std::to_string(r.activations) + ',' +
           std::to_string(r.hits) + ',' + format_double(r.hit_rate()) + ',' +
           std::to_string(r.bytes_transferred) + ',' + format_double(r.transfer_time_s()) + ',' +
           format_double(r.compute_time_s()) + ',' + format_double(r.nonexpert_time_s()) + '\n';
    return out;
}

std::string report_json(const SimReport& r) {
    ordered_json j;
    j["tokens"] = r.tokens;
    j["total_time_s"] = r.total_time_s();
    j["throughput_tps"] = r.throughput_tps();
    j["activations"] = r.activations;
    j["hits"] = r.hits;
    j["hit_rate"] = r.hit_rate();
    j["bytes_transferred"] = r.bytes_transferred;
    j["transfer_time_s"] = r.transfer_time_s();
    j["compute_time_s"] = r.compute_time_s();
    j["nonexpert_time_s"] = r.nonexpert_time_s();
    return j.dump(2) + "\n";
}

}  // namespace moeserve
