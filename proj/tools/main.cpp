#include "seirhcd/cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
  return seirhcd::run_cli({argv, argv + argc}, std::cout, std::cerr);
}
