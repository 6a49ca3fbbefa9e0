#include "mdmt/cli.hpp"

int main(int argc, char** argv)
{
    return mdmt::run_cli(argc, argv);
}
