// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "gnosis/cli.hpp"

int main(int argc, char** argv) { return gnosis::cli::run(argc, argv, std::cout, std::cerr); }
