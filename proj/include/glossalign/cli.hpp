#pragma once

namespace glossalign {

/// Full command-line surface: gen, train, eval, embed, project, gradcheck.
/// Returns the process exit code: 0 success, 1 validation/usage error,
/// 2 I/O error.
int run_cli(int argc, const char* const* argv);

}  // namespace glossalign
