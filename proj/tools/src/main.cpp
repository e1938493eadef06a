#include "progmoe_cli/cli.hpp"

int main(int argc, char** argv) { return progmoe::cli::run(argc, argv); }
