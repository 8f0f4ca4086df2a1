#include "cli.hpp"

int main(int argc, char **argv) { return confsteer::cli::run(argc, argv); }
