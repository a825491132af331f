#include <iostream>

#include "theramon/cli/cli.hpp"

int main(int argc, char** argv) { return theramon::cli::run(argc, argv, std::cout, std::cerr); }
