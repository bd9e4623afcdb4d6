#include <iostream>

#include "hybridgl/cli.hpp"

int main(int argc, char** argv) { return hybridgl::run_cli(argc, argv, std::cout, std::cerr); }
