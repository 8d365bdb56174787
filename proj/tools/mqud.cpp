#include "mqud/cli/cli.hpp"

int main(int argc, char** argv) { return mqud::cli::run(argc, argv); }
