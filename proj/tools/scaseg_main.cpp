#include <iostream>

#include "scaseg/cli.hpp"

int main(int argc, char** argv) { return scaseg::cli::run(argc, argv, std::cout, std::cerr); }
