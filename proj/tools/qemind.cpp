#include <iostream>

#include "qemind/cli.hpp"

int main(int argc, char** argv) { return qemind::cli::run(argc, argv, std::cout, std::cerr); }
