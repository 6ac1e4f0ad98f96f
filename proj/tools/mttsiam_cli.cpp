#include <iostream>

#include "mttsiam/cli.hpp"

int main(int argc, char** argv) { return mttsiam::cli::run(argc, argv, std::cout, std::cerr); }
