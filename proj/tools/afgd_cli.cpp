#include <iostream>

#include "afgd/harness/cli.hpp"

int main(int argc, char** argv) { return afgd::harness::cli_main(argc, argv, std::cout, std::cerr); }
