#include "pdeforest/cli.hpp"

int main(int argc, char **argv) { return pdeforest::cli::main(argc, argv); }
