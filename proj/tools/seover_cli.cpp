#include "seover/cli.hpp"

int main(int argc, char** argv) { return seover::cli::run(argc, argv); }
