#include "flrr/cli.hpp"

int main(int argc, char** argv) { return flrr::cli::run(argc, argv); }
