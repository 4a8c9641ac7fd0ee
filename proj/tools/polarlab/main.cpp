// polarlab command-line entry point.

#include <iostream>

#include "polarlab/cli.hpp"

int main(int argc, char** argv)
{
	return polarlab::parse_and_dispatch(argc, argv, std::cout, std::cerr);
}
