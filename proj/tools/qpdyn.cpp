#include <iostream>
#include <string>
#include <vector>

#include "qpdyn/cli_io.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return qpdyn::run_command(args, std::cout, std::cerr);
}
