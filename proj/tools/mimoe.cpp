#include <iostream>

#include "mimoe/cli.hpp"

int main(int argc, char** argv) { return mimoe::run_cli(argc, argv, std::cout, std::cerr); }
