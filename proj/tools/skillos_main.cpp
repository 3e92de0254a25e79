#include <iostream>
#include <string>
#include <vector>

#include "skillos/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return skillos::run_cli(args, std::cout, std::cerr);
}
