#include <string>
#include <vector>

#include "masfm/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return masfm::run_command(args);
}
