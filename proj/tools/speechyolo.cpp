#include <iostream>
#include <string>
#include <vector>

#include "speechyolo/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return speechyolo::cli::run(args, std::cout, std::cerr);
}
