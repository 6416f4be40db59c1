#include "mcdp/cli.hpp"

int main(int argc, char** argv) { return mcdp::cli_main(argc, argv); }
