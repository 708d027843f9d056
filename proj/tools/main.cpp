#include <iostream>

#include "bvcqr/cli.hpp"

int main(int argc, char** argv) { return bvcqr::run_cli(argc, argv, std::cout, std::cerr); }
