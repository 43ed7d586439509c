#pragma once

namespace stereoconf::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kIoError = 1;
inline constexpr int kValidationError = 2;
inline constexpr int kDivergence = 3;

int run(int argc, const char* const* argv);

}  // namespace stereoconf::cli
