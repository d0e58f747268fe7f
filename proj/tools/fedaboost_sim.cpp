#include <iostream>
#include <string>
#include <vector>

#include "fedaboost/cli.hpp"

int main(int argc, char** argv) {
  return fedaboost::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
