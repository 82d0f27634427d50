#include <iostream>

#include "dmfsync/harness.h"

int main(int argc, char** argv) {
  return dmfsync::RunCommandLine(argc, argv, std::cout, std::cerr);
}
