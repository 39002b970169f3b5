// SPDX-License-Identifier: Apache-2.0
// Internal INI tokenizer shared by the config loaders. Not installed.
#pragma once

#include <charconv>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "moeserve/errors.hpp"

namespace moeserve::ini {

struct ConfigEntry {
    std::string section;
    std::string key;
    std::string value;
    int line = 0;
};

[[noreturn]] inline void fail_line(int line, const std::string& what) {
    throw ParseError("line " + std::to_string(line) + ": " + what);
}

inline std::string_view trim(std::string_view s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string_view::npos) return {};
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

inline std::vector<ConfigEntry> parse(std::string_view document) {
    std::vector<ConfigEntry> entries;
    std::istringstream input{std::string(document)};
    std::string raw;
    std::string section;
    int line_no = 0;
    while (std::getline(input, raw)) {
        ++line_no;
        std::string_view line = trim(raw);
        if (line.empty() || line.front() == '#' || line.front() == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail_line(line_no, "unterminated section header");
            section = std::string(trim(line.substr(1, line.size() - 2)));
            if (section.empty()) fail_line(line_no, "empty section name");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) fail_line(line_no, "expected 'key = value'");
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key.empty()) fail_line(line_no, "empty key");
        if (value.empty()) fail_line(line_no, "empty value for key '" + std::string(key) + "'");
        if (section.empty())
            fail_line(line_no, "key '" + std::string(key) + "' outside any [section]");
        entries.push_back({section, std::string(key), std::string(value), line_no});
    }
    return entries;
}

inline double parse_double_value(const ConfigEntry& e) {
    const std::string_view s = e.value;
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        fail_line(e.line, "key '" + e.key + "': malformed number '" + e.value + "'");
    return out;
}

inline int parse_int_value(const ConfigEntry& e) {
    const std::string_view s = e.value;
    int out = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        fail_line(e.line, "key '" + e.key + "': malformed integer '" + e.value + "'");
    return out;
}

}  // namespace moeserve::ini
