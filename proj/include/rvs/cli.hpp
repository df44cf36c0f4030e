// Copyright (c) 2026 the rvs contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iostream>

namespace rvs::cli {

// Exit codes shared by all subcommands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNumericalCheck = 2;
inline constexpr int kExitDivergence = 3;

// Entry point behind the rvs binary; split out so tests can invoke commands
// in-process and capture the primary output stream.
int run(int argc, const char *const *argv, std::ostream &out = std::cout,
        std::ostream &err = std::cerr);

}  // namespace rvs::cli
