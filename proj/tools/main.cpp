#include "cli.hpp"

int main(int argc, char** argv) { return mcelmap::cli::run(argc, argv); }
