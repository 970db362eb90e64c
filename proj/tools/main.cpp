#include "ntkmmd/cli.hpp"

int main(int argc, char** argv) { return ntkmmd::cli::dispatch(argc, argv); }
