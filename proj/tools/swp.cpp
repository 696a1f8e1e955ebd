#include <iostream>

#include "swp/cli.hpp"

int main(int argc, char** argv) { return swp::run_cli(argc, argv, std::cout, std::cerr); }
