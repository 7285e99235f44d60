#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace midsg {

// Exit codes: 0 success, 1 usage or validation error, 2 runtime error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace midsg
