#include <iostream>
#include <string>
#include <vector>

#include "zrpfluid/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return zrpfluid::cli::run(args, std::cout, std::cerr);
}
