#include "hemo/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return hemo::run_cli(argc, argv, std::cout, std::cerr); }
