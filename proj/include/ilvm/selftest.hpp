#pragma once

#include <ostream>

namespace ilvm {

// Runs the identity and property batteries (convex calculus, the exact
// loss identities, gradient checks, optimizer and determinism smoke tests).
// Prints one line per check and returns the number of failures.
int selftest_run(std::ostream& out, bool verbose = false);

}  // namespace ilvm
