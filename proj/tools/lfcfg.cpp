#include <iostream>

#include "lfcfg/cli.hpp"

int main(int argc, char** argv) { return lfcfg::cli_main(argc, argv, std::cout, std::cerr); }
