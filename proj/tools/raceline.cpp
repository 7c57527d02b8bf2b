#include "raceline/cli.hpp"

int main(int argc, char** argv) { return raceline::run_cli(argc, argv); }
