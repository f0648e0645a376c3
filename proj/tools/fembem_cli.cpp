#include <iostream>

#include "fembem/experiments.hpp"

int main(int argc, char** argv) { return fembem::run_cli(argc, argv, std::cout, std::cerr); }
