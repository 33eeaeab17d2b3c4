#include <iostream>

#include "blindsr/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return blindsr::cli::run(args, std::cout, std::cerr);
}
