#include <iostream>

#include "dapotion/cli.hpp"

int main(int argc, char** argv) {
  using namespace dapotion::cli;
  RunConfig cfg;
  try {
    cfg = parse_args(argc, argv);
  } catch (const CliError& e) {
    (e.exit_code == 0 ? std::cout : std::cerr) << e.text;
    return e.exit_code;
  }
  return run(cfg, std::cout, std::cerr);
}
