// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

// The distro's libbenchmark_main.a ships LTO bytecode only, so main lives here.
BENCHMARK_MAIN();
