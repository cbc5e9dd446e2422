#include <iostream>

#include "lupiet/cli/commands.hpp"

int main(int argc, char** argv) { return lupiet::cli::run(argc, argv, std::cout, std::cerr); }
