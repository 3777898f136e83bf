#include <iostream>
#include <string>
#include <vector>

#include "rtpc/app/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return rtpc::app::run_cli(args, std::cout, std::cerr);
}
