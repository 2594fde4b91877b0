#include <iostream>

#include "linkring/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return linkring::run_cli(args, std::cin, std::cout, std::cerr);
}
