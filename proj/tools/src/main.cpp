#include <iostream>

#include "eqcon_cli/cli.hpp"

int main(int argc, char** argv) { return eqcon::cli::run_cli(argc, argv, std::cout, std::cerr); }
