#include "pwcopt/cli.hpp"

int main(int argc, char** argv) { return pwcopt::cli::run(argc, argv); }
