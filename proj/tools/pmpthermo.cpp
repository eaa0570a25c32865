#include <iostream>

#include "pmpthermo/cli.hpp"

int main(int argc, char** argv) { return pmpthermo::cli::run(argc, argv, std::cout, std::cerr); }
