#include "rigidflow/cli.hpp"

int main(int argc, char** argv) { return rigidflow::run_cli(argc, argv); }
