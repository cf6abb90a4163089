#include <iostream>

#include "commands.hpp"

int main(int argc, char** argv) {
  rcm::tune_allocator();
  return rcm::cli::run(argc, argv, std::cerr);
}
