#include <iostream>

#include "ppt/cli.hpp"

int main(int argc, char** argv) { return ppt::run_cli(argc, argv, std::cout, std::cerr); }
