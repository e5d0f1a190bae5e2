#include "mmfuse/cli.hpp"

int main(int argc, char** argv) { return mmfuse::run_cli(argc, argv); }
