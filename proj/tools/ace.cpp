#include <iostream>
#include <string>
#include <vector>

#include "ace/cli.hpp"

int main(int argc, char** argv) {
  return ace::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
