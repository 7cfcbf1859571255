#include <iostream>
#include <string>
#include <vector>

#include "facerec/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return facerec::run_cli(args, std::cout, std::cerr);
}
