// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>

namespace moeserve {

// Malformed input text (config documents, trace files, plan files).
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Structurally valid input that violates a domain invariant.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// No placement satisfies the memory budget.
struct InfeasibleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad command-line flag combination.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace moeserve
