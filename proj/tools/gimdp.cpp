#include <iostream>

#include "gimdp/cli.hpp"

int main(int argc, char** argv) { return gimdp::cli::run(argc, argv, std::cout, std::cerr); }
