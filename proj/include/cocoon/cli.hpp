#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace cocoon {

// Entry point of the cocoonbench tool. args excludes the program name.
// Returns the process exit code; data goes to out, diagnostics to err.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Worker threads: hardware concurrency capped by COCOONBENCH_THREADS when set.
std::size_t worker_threads();

}  // namespace cocoon
