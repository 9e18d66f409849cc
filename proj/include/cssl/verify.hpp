#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cssl {

struct CheckResult {
  std::string name;
  long checked = 0;
  long failures = 0;
  double worst_slack = 0.0;  // most negative margin seen; >= 0 is healthy
};

struct VerifyReport {
  std::vector<CheckResult> checks;
  bool all_pass = true;
  std::uint64_t seed = 0;
};

// Property suite over the bound family: ordering against the exact
// objective, tightness at uniform and one-hot inputs, single- vs
// multi-sample ordering on shared draws, the MixMatch chain, s = 1
// reductions, and the zero-noise Monte-Carlo consistency check.
// corrupt_entropy_bound is a test hook that shifts the entropy bound up by
// 0.1, which a healthy suite must catch.
VerifyReport verify_bounds(long samples, std::uint64_t seed,
                           bool corrupt_entropy_bound = false);

}  // namespace cssl
