#include "stereoconf/cli.hpp"

int main(int argc, char** argv) { return stereoconf::cli::run(argc, argv); }
