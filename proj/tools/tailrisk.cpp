#include "tailrisk/cli.hpp"

int main(int argc, char** argv) { return tailrisk::run_cli(argc, argv); }
