// Command-line front end: simulate, fit, predict, eval and bench.

#ifndef CROWDPAIR_CLI_H_
#define CROWDPAIR_CLI_H_

#include <ostream>

namespace crowdpair {

// Exit codes: 0 success, 1 usage error, 2 data or numeric error.
int run(int argc, char** argv);
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace crowdpair

#endif  // CROWDPAIR_CLI_H_
