#include <iostream>

#include "crtiv/cli.hpp"

int main(int argc, char** argv) { return crtiv::run_cli(argc, argv, std::cout, std::cerr); }
