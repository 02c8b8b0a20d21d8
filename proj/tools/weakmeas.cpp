#include "weakmeas/cli.hpp"

int main(int argc, char** argv) { return weakmeas::cli::run_cli(argc, argv); }
