#include <iostream>
#include <string>
#include <vector>

#include "vqwave/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return vqwave::run_cli(args, std::cout, std::cerr);
}
