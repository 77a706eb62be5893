#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace senserate::cli {

/// Exit codes: 0 success, 1 validation or usage error, 2 transport error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Version line plus the similarity kernels picked on this machine.
std::string build_info();

}  // namespace senserate::cli
