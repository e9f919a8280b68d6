#pragma once

namespace ibprox {

/// Entry point behind the command-line tool. Subcommands: gen, run, bench,
/// check-params. Returns 0 on success, 1 on usage errors, 2 on runtime
/// failures.
int cli_main(int argc, const char* const* argv);

}  // namespace ibprox
