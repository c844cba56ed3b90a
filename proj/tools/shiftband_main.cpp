#include "shiftband/cli.hpp"

int main(int argc, char** argv) { return shiftband::cli::run(argc, argv); }
