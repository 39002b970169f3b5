// SPDX-License-Identifier: Apache-2.0
#include "moeserve/gating.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "moeserve/errors.hpp"
#include "moeserve/rng.hpp"

namespace moeserve {

namespace {

[[noreturn]] void fail_line(int line, const std::string& what) {
    throw ParseError("line " + std::to_string(line) + ": " + what);
}

int parse_field_int(std::string_view s, int line, const char* what) {
    int out = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        fail_line(line, std::string("malformed ") + what + " '" + std::string(s) + "'");
    return out;
}

}  // namespace

GatingTrace generate_trace(const ModelProfile& profile, int tokens, uint64_t seed) {
    if (tokens < 1) throw ValidationError("tokens must be >= 1 (got " + std::to_string(tokens) + ")");
    validate_profile(profile);

    GatingTrace trace;
    trace.profile_fingerprint = profile_fingerprint(profile);
    trace.tokens = tokens;
    trace.num_layers = profile.num_layers;
    trace.experts_per_layer = profile.experts_per_layer;
    trace.top_k = profile.top_k;
    trace.slots.resize(static_cast<size_t>(tokens) * profile.num_layers * profile.top_k);

    Xoshiro256 rng(seed);
    size_t pos = 0;
    for (int t = 0; t < tokens; ++t) {
        for (int l = 0; l < profile.num_layers; ++l) {
            auto picked = sample_without_replacement(profile.experts_per_layer, profile.top_k, rng);
            std::sort(picked.begin(), picked.end());
            for (int slot : picked) trace.slots[pos++] = slot;
        }
    }
    return trace;
}

std::string write_trace(const GatingTrace& trace) {
    std::string out;
    out.reserve(trace.slots.size() * 3 + 64);
    char header[160];
    std::snprintf(header, sizeof header,
                  "# moeserve-trace v1 fingerprint=%s tokens=%d layers=%d experts_per_layer=%d "
                  "top_k=%d\n",
                  fingerprint_hex(trace.profile_fingerprint).c_str(), trace.tokens,
                  trace.num_layers, trace.experts_per_layer, trace.top_k);
    out += header;
    for (int t = 0; t < trace.tokens; ++t) {
        for (int l = 0; l < trace.num_layers; ++l) {
            out += std::to_string(t);
            out += ',';
            out += std::to_string(l);
            const int32_t* rec = trace.record(t, l);
            for (int i = 0; i < trace.top_k; ++i) {
                out += ',';
                out += std::to_string(rec[i]);
            }
            out += '\n';
        }
    }
    return out;
}

void write_trace_file(const GatingTrace& trace, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open trace file for writing: " + path);
    out << write_trace(trace);
}

GatingTrace read_trace(std::string_view document) {
    std::istringstream input{std::string(document)};
    std::string raw;
    int line_no = 0;

    if (!std::getline(input, raw)) throw ParseError("empty trace document");
    ++line_no;
    GatingTrace trace;
    {
        constexpr std::string_view magic = "# moeserve-trace v1 ";
        if (raw.rfind(magic, 0) != 0)
            fail_line(line_no, "missing '# moeserve-trace v1' header");
        std::istringstream fields{raw.substr(magic.size())};
        std::string field;
        bool have_fp = false, have_tokens = false, have_layers = false, have_epl = false,
             have_k = false;
        while (fields >> field) {
            const auto eq = field.find('=');
            if (eq == std::string::npos) fail_line(line_no, "malformed header field '" + field + "'");
            const std::string key = field.substr(0, eq);
            const std::string value = field.substr(eq + 1);
            if (key == "fingerprint") {
                uint64_t fp = 0;
                const auto [ptr, ec] =
                    std::from_chars(value.data(), value.data() + value.size(), fp, 16);
                if (ec != std::errc{} || ptr != value.data() + value.size())
                    fail_line(line_no, "malformed fingerprint '" + value + "'");
                trace.profile_fingerprint = fp;
                have_fp = true;
            } else if (key == "tokens") {
                trace.tokens = parse_field_int(value, line_no, "tokens");
                have_tokens = true;
            } else if (key == "layers") {
                trace.num_layers = parse_field_int(value, line_no, "layers");
                have_layers = true;
            } else if (key == "experts_per_layer") {
                trace.experts_per_layer = parse_field_int(value, line_no, "experts_per_layer");
                have_epl = true;
            } else if (key == "top_k") {
                trace.top_k = parse_field_int(value, line_no, "top_k");
                have_k = true;
            } else {
                fail_line(line_no, "unknown header field '" + key + "'");
            }
        }
        if (!have_fp || !have_tokens || !have_layers || !have_epl || !have_k)
            fail_line(line_no, "header must carry fingerprint, tokens, layers, experts_per_layer, top_k");
    }
    if (trace.tokens < 1) fail_line(1, "tokens must be >= 1");
    if (trace.num_layers < 1 || trace.experts_per_layer < 1)
        fail_line(1, "layers and experts_per_layer must be >= 1");
    if (trace.top_k < 1 || trace.top_k > trace.experts_per_layer)
        fail_line(1, "top_k must be in [1, experts_per_layer]");

    trace.slots.resize(static_cast<size_t>(trace.tokens) * trace.num_layers * trace.top_k);
    size_t pos = 0;
    for (int t = 0; t < trace.tokens; ++t) {
        for (int l = 0; l < trace.num_layers; ++l) {
            if (!std::getline(input, raw))
                fail_line(line_no + 1, "missing record for token " + std::to_string(t) + " layer " +
                                           std::to_string(l));
            ++line_no;
            std::vector<std::string_view> fields;
            std::string_view row = raw;
            if (!row.empty() && row.back() == '\r') row.remove_suffix(1);
            size_t start = 0;
            while (true) {
                const size_t comma = row.find(',', start);
                fields.push_back(row.substr(start, comma == std::string_view::npos
                                                       ? std::string_view::npos
                                                       : comma - start));
                if (comma == std::string_view::npos) break;
                start = comma + 1;
            }
            if (static_cast<int>(fields.size()) != 2 + trace.top_k)
                fail_line(line_no, "expected " + std::to_string(2 + trace.top_k) +
                                       " comma-separated fields, got " +
                                       std::to_string(fields.size()));
            if (parse_field_int(fields[0], line_no, "token index") != t ||
                parse_field_int(fields[1], line_no, "layer index") != l)
                fail_line(line_no, "expected record for token " + std::to_string(t) + " layer " +
                                       std::to_string(l));
            int prev = -1;
            for (int i = 0; i < trace.top_k; ++i) {
                const int slot = parse_field_int(fields[static_cast<size_t>(2 + i)], line_no, "slot");
                if (slot < 0 || slot >= trace.experts_per_layer)
                    fail_line(line_no, "slot " + std::to_string(slot) + " out of range [0, " +
                                           std::to_string(trace.experts_per_layer) + ")");
                if (slot == prev) fail_line(line_no, "duplicate slot " + std::to_string(slot));
                if (slot < prev) fail_line(line_no, "slots not in ascending order");
                prev = slot;
                trace.slots[pos++] = slot;
            }
        }
    }
    while (std::getline(input, raw)) {
        ++line_no;
        if (!std::string_view(raw).empty() && !raw.starts_with('\r'))
            fail_line(line_no, "trailing content after the last record");
    }
    return trace;
}

GatingTrace read_trace_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open trace file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return read_trace(buf.str());
}

}  // namespace moeserve
