#pragma once

namespace thermalsr::cli {

/// Exit codes: 0 success, 2 partial success, 64 usage error, 65 data error.
inline constexpr int exit_ok = 0;
inline constexpr int exit_partial = 2;
inline constexpr int exit_usage = 64;
inline constexpr int exit_data = 65;

int run(int argc, char** argv);

} // namespace thermalsr::cli
