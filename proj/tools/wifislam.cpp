#include <iostream>

#include "wifislam/cli.hpp"

int main(int argc, char** argv) {
  return wifislam::cli::main(argc, argv, std::cout, std::cerr);
}
