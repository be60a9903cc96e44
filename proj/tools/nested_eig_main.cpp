#include "nested_eig/cli.hpp"

int main(int argc, char** argv) { return nested_eig::run_cli(argc, argv); }
