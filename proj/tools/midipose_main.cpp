#include "midipose/cli.hpp"

int main(int argc, char** argv) { return midipose::cli::run_cli(argc, argv); }
