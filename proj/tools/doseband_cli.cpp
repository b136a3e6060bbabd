#include <iostream>

#include "doseband/commands.hpp"

int main(int argc, char** argv) { return doseband::run_cli(argc, argv, std::cout, std::cerr); }
