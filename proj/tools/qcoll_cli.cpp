#include <iostream>

#include "qcoll/cli.hpp"

int main(int argc, char** argv) { return qcoll::cli::run(argc, argv, std::cout, std::cerr); }
