#pragma once

namespace divkit {

/// Full command-line entry point. Exit codes: 0 success, 1 usage error,
/// 2 data error, 3 numeric failure. Diagnostics go to stderr; machine
/// output goes to files only.
int run_cli(int argc, const char* const* argv);

}  // namespace divkit
