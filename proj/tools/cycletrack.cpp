#include <iostream>

#include "cycletrack/cli.hpp"

int main(int argc, char** argv) { return cycletrack::run_cli(argc, argv, std::cout, std::cerr); }
