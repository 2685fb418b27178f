#include "cli.hpp"

int main(int argc, char** argv) { return dbrn::cli::run(argc, argv); }
