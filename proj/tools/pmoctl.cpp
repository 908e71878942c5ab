// Copyright 2026 The pmostore Authors.
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "pmo/cli.hpp"

int main(int argc, char** argv) {
  return pmo::cli::run_pmoctl(argc, argv, std::cout, std::cerr);
}
