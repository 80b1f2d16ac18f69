#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pkw::cli {

// Parses and runs one pkwbench command. Progress and reports go to `out`;
// failures are reported on `err` as a one-line JSON record and leave a
// <workspace>/<command>.failed marker. Returns the process exit status.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pkw::cli
