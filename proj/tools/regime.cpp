#include "regime/commands.hpp"

#include <iostream>

int main(int argc, char** argv) { return regime::run_cli(argc, argv, std::cout, std::cerr); }
