#include "linhash/cli.hpp"

int main(int argc, char** argv) { return linhash::cli::run(argc, argv); }
