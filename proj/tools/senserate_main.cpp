#include <iostream>
#include <string>
#include <vector>

#include "senserate/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return senserate::cli::run(args, std::cout, std::cerr);
}
