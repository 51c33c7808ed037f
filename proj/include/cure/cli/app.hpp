// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace cure::cli {

/// Entry point of the `cure` executable. Returns the process exit code:
/// 0 success, 1 validation error, 2 runtime error, 3 annotator failure.
int run_app(int argc, const char* const* argv);

}  // namespace cure::cli
