#include "divkit/cli.hpp"

int main(int argc, char** argv) { return divkit::run_cli(argc, argv); }
