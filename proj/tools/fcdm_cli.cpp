#include "fcdm/cli.hpp"

int main(int argc, char** argv) { return fcdm::cli::run_cli(argc, argv); }
