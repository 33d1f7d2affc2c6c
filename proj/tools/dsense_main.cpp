#include "dsense/cli.hpp"

int main(int argc, char** argv) { return dsense::run_cli(argc, argv); }
