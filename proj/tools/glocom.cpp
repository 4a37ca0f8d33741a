#include "glocom/cli.hpp"

int main(int argc, char** argv) { return glocom::run_cli(argc, argv); }
