// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace seqdesc::cli {

/// Dispatches to the subcommands (synth, train, eval, eval-captions,
/// ablate-noise, ablate-grid, schedule). Exit codes: 0 success, 1 usage
/// error (usage text on stderr), 2 input/config error, 3 runtime failure.
int run(int argc, const char* const* argv);

}  // namespace seqdesc::cli
