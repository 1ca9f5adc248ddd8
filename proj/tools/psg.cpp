#include "psg/cli.hpp"

int main(int argc, char** argv) { return psg::run_cli(argc, argv); }
