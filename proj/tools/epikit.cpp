#include <iostream>

#include "epikit/cli.hpp"

int main(int argc, char** argv) { return epikit::run_cli(argc, argv, std::cout, std::cerr); }
