// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace moeserve::cli {

// Entry point behind the `moeserve` binary.
// Exit codes: 0 success, 1 internal error, 2 usage error, 3 validation or
// parse error, 4 infeasible budget.
int run(int argc, const char* const* argv);

}  // namespace moeserve::cli
