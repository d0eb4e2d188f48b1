#include "mvpi/cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return mvpi::run_cli(argc, argv, std::cout, std::cerr);
}
