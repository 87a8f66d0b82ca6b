#include "rgcseg/cli.hpp"

int main(int argc, char** argv) { return rgcseg::run_cli(argc, argv); }
