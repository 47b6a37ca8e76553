#include "hamqec/cli.hpp"

int main(int argc, char **argv) { return hamqec::cli::run(argc, argv); }
