#include "glossalign/cli.hpp"

int main(int argc, char** argv) { return glossalign::run_cli(argc, argv); }
