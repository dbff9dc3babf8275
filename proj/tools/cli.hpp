// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>

namespace ssod::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kRuntime = 2 };

/// Parses argv and runs one verb. Messages go to err; progress to out.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ssod::cli
