#include "transmamba/cli.hpp"

int main(int argc, char** argv) { return transmamba::cli::main(argc, argv); }
