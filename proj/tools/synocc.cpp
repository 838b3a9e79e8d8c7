#include "synocc/cli.hpp"

int main(int argc, char** argv) { return synocc::run_cli(argc, argv); }
