#include "wspec/cli.hpp"

int main(int argc, char** argv) { return wspec::run_cli(argc, argv); }
