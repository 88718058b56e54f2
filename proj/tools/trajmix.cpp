#include <iostream>
#include <string>
#include <vector>

#include "trajmix/io/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  return trajmix::io::run_command(args, std::cout, std::cerr);
}
