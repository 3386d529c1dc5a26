#pragma once

#include <string>
#include <vector>

namespace masfm {

// Command-line entry point. `args` excludes the program name, e.g.
// {"synth", "--rig", "orbit", ...}. Exit status: 0 success, 2 usage or
// input-file error, 3 annotation required (ProviderDeclined), 4 numerical
// or estimation failure.
int run_command(const std::vector<std::string>& args);

}  // namespace masfm
