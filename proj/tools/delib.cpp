#include <iostream>

#include "delib/cli.hpp"

int main(int argc, char** argv) { return delib::run_cli(argc, argv, std::cout, std::cerr); }
