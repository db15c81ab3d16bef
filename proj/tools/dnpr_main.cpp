#include "dnpr/cli.hpp"

int main(int argc, char** argv) { return dnpr::cli::run(argc, argv); }
