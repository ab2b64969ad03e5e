#include "consentforge/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return consentforge::cli::run(argc, argv, std::cout, std::cerr); }
