// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>

#include "moeserve/planner.hpp"
#include "moeserve/reconfig.hpp"
#include "moeserve/simulator.hpp"

namespace moeserve {

// Placement plans and reconfiguration plans serialize as JSON documents
// stamped with the profile fingerprint; readers reject artifacts written for
// a different profile. Writing is canonical, so identical inputs produce
// byte-identical documents.

std::string write_plan(const PlacementPlan& plan, const ModelProfile& profile);
PlacementPlan read_plan(std::string_view document, const ModelProfile& profile);
void write_plan_file(const PlacementPlan& plan, const ModelProfile& profile,
                     const std::string& path);
PlacementPlan read_plan_file(const std::string& path, const ModelProfile& profile);

std::string write_reconfig(const ReconfigPlan& plan, const ModelProfile& profile);
ReconfigPlan read_reconfig(std::string_view document, const ModelProfile& profile,
                           const HardwareProfile& hw);
void write_reconfig_file(const ReconfigPlan& plan, const ModelProfile& profile,
                         const std::string& path);
ReconfigPlan read_reconfig_file(const std::string& path, const ModelProfile& profile,
                                const HardwareProfile& hw);

std::string report_csv(const SimReport& report);
std::string report_json(const SimReport& report);

// Shortest representation that round-trips; used for every float we print.
std::string format_double(double value);

}  // namespace moeserve
