#include <iostream>

#include "tportal/cli.hpp"

int main(int argc, char** argv) { return tportal::cli::run(argc, argv, std::cout, std::cerr); }
