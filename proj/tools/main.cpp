#include "fallacy/cli.hpp"

int main(int argc, char** argv) { return fallacy::cli::run(argc, argv); }
