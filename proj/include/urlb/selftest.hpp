#pragma once

#include <iosfwd>

namespace urlb::selftest {

// Runs the fast invariant suite (kernel equivalence, estimator fixtures,
// arithmetic identities), printing one line per check. Returns the number
// of failed checks.
int run(std::ostream& os);

}  // namespace urlb::selftest
