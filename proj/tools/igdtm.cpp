#include <iostream>
#include <string>
#include <vector>

#include "igdtm/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return igdtm::run_cli(args, std::cout, std::cerr);
}
