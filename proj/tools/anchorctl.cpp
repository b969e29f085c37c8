#include "anchor/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return anchor::run_cli(argc, argv, std::cout, std::cerr); }
