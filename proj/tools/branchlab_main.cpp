#include "branchlab/cli.hpp"

int main(int argc, char** argv) { return branchlab::cli::dispatch(argc, argv); }
