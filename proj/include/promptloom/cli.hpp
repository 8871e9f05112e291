#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace promptloom {

// Exit codes: 0 success, 1 domain rejection, 2 usage error.
// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace promptloom
