#include <iostream>

#include "mustan/cli.hpp"

int main(int argc, char** argv) { return mustan::run_cli(argc, argv, std::cout, std::cerr); }
