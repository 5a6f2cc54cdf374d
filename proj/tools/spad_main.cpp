#include <iostream>
#include <string>
#include <vector>

#include "spad/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return spad::run_cli(args, std::cout, std::cerr);
}
