#include <iostream>
#include <string>
#include <vector>

#include "resshift/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return resshift::run_cli(args, std::cout, std::cerr);
}
