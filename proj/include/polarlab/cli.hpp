// Command-line front end: sample, train-mine, train-nsc, train-nsc-hy,
// design, eval-ber, probe-complexity and oracle-check.

#pragma once

#include <iosfwd>

namespace polarlab {

/// Runs one command line. Data goes to `out` (or to files named by the
/// flags), logs and errors to `err`. Returns the process exit status.
int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace polarlab
