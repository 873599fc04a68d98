#include "gvm/cli.hpp"

#include <iostream>

int main(int argc, char **argv) {
  return gvm::cli::main({argv + 1, argv + argc}, std::cout, std::cerr);
}
