#include "gsamn/cli.hpp"

int main(int argc, char** argv) { return gsamn::run_cli(argc, argv); }
