#include "trb/cli.hpp"

int main(int argc, char** argv) { return trb::cli::run(argc, argv); }
