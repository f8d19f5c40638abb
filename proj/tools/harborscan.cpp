#include <iostream>

#include "harborscan/cli.hpp"

int main(int argc, char** argv) { return harborscan::run_cli(argc, argv, std::cout, std::cerr); }
