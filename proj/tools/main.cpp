#include "stylesplat/cli/cli.hpp"

int main(int argc, char** argv) { return stylesplat::run_cli(argc, argv); }
