#include "llp/cli.hpp"

int main(int argc, char** argv) { return llp::run_cli(argc, argv); }
