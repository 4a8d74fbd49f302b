#include "rinktrack/cli.hpp"

int main(int argc, char** argv) { return rinktrack::run_cli(argc, argv); }
