#pragma once

namespace blink {

// Full command-line entry point; returns the process exit code
// (0 success, 1 runtime failure, 2 usage/config error).
int cli_main(int argc, const char* const* argv);

}  // namespace blink
