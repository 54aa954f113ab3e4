#include <iostream>

#include "mulma_cli/cli.hpp"

int main(int argc, char** argv) { return mulma::cli::run(argc, argv, std::cout, std::cerr); }
