#include <string>
#include <vector>

#include "deepparaphrase/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dpp::cli::run(args);
}
