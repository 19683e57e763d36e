#include <iostream>

#include "cad/cli/cli.hpp"

int main(int argc, char** argv) { return cad::cli::run({argv, argv + argc}, std::cout, std::cerr); }
