// Exit codes: 0 success, 2 usage, 3 data validation, 4 solver failure, 5 invariant violation.
#include <iostream>
#include <string>
#include <vector>

#include "fairalloc/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return fairalloc::cli::run(args, std::cout, std::cerr);
}
