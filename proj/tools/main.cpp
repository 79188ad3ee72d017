#include "cli.hpp"

int main(int argc, char ** argv) { return introspect::cli::run(argc, argv); }
