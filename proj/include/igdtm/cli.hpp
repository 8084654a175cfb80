#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace igdtm {

/// Entry point of the `igdtm` tool; `args` excludes the program name.
/// Exit codes: 0 success, 1 error, 2 segmentation stopped at max_iters.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace igdtm
