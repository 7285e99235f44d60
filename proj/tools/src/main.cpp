#include "midsg/cli.hpp"

int main(int argc, char** argv) { return midsg::run_cli(argc, argv); }
