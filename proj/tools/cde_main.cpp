#include "cde/cli.hpp"

int main(int argc, char** argv) { return cde::cli::run(argc, argv); }
