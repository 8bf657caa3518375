#include <iostream>
#include <string>
#include <vector>

#include "sedloss/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return sedloss::cli::run(args, std::cout, std::cerr);
}
