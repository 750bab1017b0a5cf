#include <iostream>
#include <string>
#include <vector>

#include "seqtoa/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return seqtoa::run_cli(args, std::cout, std::cerr);
}
