#include <iostream>

#include "lso/cli.hpp"

int main(int argc, char** argv) { return lso::dispatch(argc, argv, std::cout, std::cerr); }
