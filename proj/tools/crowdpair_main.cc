#include "crowdpair/cli.h"

int main(int argc, char** argv) { return crowdpair::run(argc, argv); }
