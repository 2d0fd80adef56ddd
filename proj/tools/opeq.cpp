#include "opeq/cli.hpp"

int main(int argc, char **argv) { return opeq::cli_main(argc, argv); }
