#include <iostream>

#include "rla/cli.h"

int main(int argc, char** argv) { return rla::run_cli(argc, argv, std::cout, std::cerr); }
