#include "colorweak/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return colorweak::run_cli(argc, argv, std::cout, std::cerr); }
