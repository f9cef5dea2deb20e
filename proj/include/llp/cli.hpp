#pragma once

namespace llp {

// Entry point shared by the llp binary and the CLI tests. Returns the
// process exit code; failures print a single "error: ..." line on stderr.
int run_cli(int argc, const char* const* argv);

}  // namespace llp
