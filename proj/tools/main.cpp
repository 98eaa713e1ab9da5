#include <iostream>
#include <string>
#include <vector>

#include "climprice/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return climprice::cli::run(args, std::cerr, std::cerr);
}
