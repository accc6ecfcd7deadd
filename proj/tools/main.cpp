#include <vector>

#include "pacc/cli/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return pacc::cli::dispatch(args);
}
