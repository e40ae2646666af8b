#include <iostream>

#include "exposcope/cli.hpp"

int main(int argc, char** argv) {
  return exposcope::run_command({argv + 1, argv + argc}, std::cout, std::cerr);
}
