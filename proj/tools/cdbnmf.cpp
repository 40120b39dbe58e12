#include <iostream>

#include "cdbnmf/cli.hpp"

int main(int argc, char** argv) { return cdbnmf::cli::main(argc, argv, std::cout, std::cerr); }
