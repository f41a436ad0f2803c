#include <iostream>
#include <string>
#include <vector>

#include "ropelab/cli.hpp"

int main(int argc, char** argv) {
    const std::vector<std::string> args(argv + 1, argv + argc);
    return ropelab::cli::main_entry(args, std::cout, std::cerr);
}
