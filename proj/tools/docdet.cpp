#include <iostream>

#include "docdet/cli.hpp"

int main(int argc, char** argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    return docdet::run(args, std::cout, std::cerr);
}
