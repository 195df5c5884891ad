#include "cli.hpp"

int main(int argc, char** argv) { return shapeopt::cli::main(argc, argv); }
