#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace prgrad {

// Entry point behind the command-line binary; args exclude the program name.
// Streams are injected so tests can run it in-process. Exit codes: 0 success
// (a max-iterations solve is still a success), 2 usage error, 3 I/O error.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace prgrad
