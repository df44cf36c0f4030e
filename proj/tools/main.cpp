// Copyright (c) 2026 the rvs contributors.
// SPDX-License-Identifier: Apache-2.0

#include "rvs/cli.hpp"

int main(int argc, char **argv) { return rvs::cli::run(argc, argv); }
