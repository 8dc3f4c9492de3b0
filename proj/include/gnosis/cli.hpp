// Copyright 2026 The Gnosis Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line entry point.
//
//   gnosis <subcommand> [--config FILE] [--set key.path=value ...]
//          [--out DIR] [--threads N] [-v | -q] [subcommand flags]
//
// Config files hold the trees {"preset", "model", "train", "synthetic",
// "args"}; precedence is defaults < config file < --set < explicit flags.
// The output directory is --out, else $GNOSIS_OUT, else ./gnosis_out. The
// resolved trees are written to <out>/effective_config.json before any work,
// and passing that file back via --config repeats the run.
//
// Exit codes: 0 success, 1 usage or validation error, 2 runtime error.

#pragma once

#include <iosfwd>

namespace gnosis::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

inline constexpr const char* kEffectiveConfigFile = "effective_config.json";
inline constexpr const char* kDefaultOutDir = "gnosis_out";

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gnosis::cli
