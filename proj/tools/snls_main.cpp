// Command-line entry point; all behavior lives in the library so tests can
// drive the same code path in process.

#include "snls/cli_io.hpp"

int main(int argc, char** argv) { return snls::cli_main(argc, argv); }
