#include "commands.hpp"

int main(int argc, char** argv) { return shiftlab::cli::run(argc, argv); }
