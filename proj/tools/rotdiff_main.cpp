#include "rotdiff/cli.hpp"

int main(int argc, char** argv) { return rotdiff::run_cli(argc, argv); }
