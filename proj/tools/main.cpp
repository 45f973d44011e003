#include <iostream>
#include <string>
#include <vector>

#include "hierage/cli.hpp"

int main(int argc, char** argv) {
  return hierage::dispatch(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
