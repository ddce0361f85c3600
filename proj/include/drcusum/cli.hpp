#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace drcusum::cli {

// Dispatches a command line (without the program name) to a subcommand:
// detect, detect-online, simulate, evaluate, oracle-check, theorem-check.
// Exit codes: 0 success, 1 usage error, 2 data/config error, 3 runtime
// failure (oracle-check and theorem-check also use 3 for a failed check).
// All randomness flows from --seed, so identical arguments give byte-identical
// outputs.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace drcusum::cli
