#include <string>
#include <vector>

#include "visprompt/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return visprompt::cli::run(args);
}
