#include <iostream>

#include "dgd/cli.hpp"

int main(int argc, char** argv) { return dgd::cli::run(argc, argv, std::cout, std::cerr); }
