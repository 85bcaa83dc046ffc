#pragma once

namespace dr {

/// Entry point behind the `dr` binary. Returns 0 on success, 1 on runtime
/// errors, 2 on usage errors.
int run_command(int argc, const char* const* argv);

}  // namespace dr
