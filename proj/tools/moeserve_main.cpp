// SPDX-License-Identifier: Apache-2.0
#include "moeserve/cli.hpp"

int main(int argc, char** argv) { return moeserve::cli::run(argc, argv); }
