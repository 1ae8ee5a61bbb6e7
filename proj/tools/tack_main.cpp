#include "tack/cli.hpp"

int main(int argc, char** argv) { return tack::cli::main(argc, argv); }
