#include <iostream>
#include <string>
#include <vector>

#include "cbm/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cbm::run_cli(args, std::cout, std::cerr);
}
