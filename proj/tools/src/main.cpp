#include "pancraft_cli/cli.hpp"

int main(int argc, char** argv) { return pancraft::cli::run(argc, argv); }
