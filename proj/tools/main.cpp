#include "commands.hpp"

int main(int argc, char** argv) { return maskbeam::cli::cli_main(argc, argv); }
