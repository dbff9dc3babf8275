// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) {
  return ssod::cli::dispatch(argc, argv, std::cout, std::cerr);
}
