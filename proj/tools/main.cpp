#include <iostream>
#include <string>
#include <vector>

#include "isloss/cli.hpp"

int main(int argc, char** argv) {
    return isloss::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
