#include <iostream>

#include "kmsdyn/cli.hpp"

int main(int argc, char** argv) { return kmsdyn::cli::run(argc, argv, std::cout, std::cerr); }
