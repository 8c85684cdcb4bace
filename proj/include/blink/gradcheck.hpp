#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace blink {

struct GradCheckCase {
  std::string name;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct GradCheckReport {
  std::vector<GradCheckCase> cases;
  double seconds = 0.0;
  bool all_pass() const;
  std::string table() const;
};

// Central finite differences in 64-bit against the recorded adjoints.
// Per-op cases use randomized small shapes over `seeds` draws; the
// end-to-end case samples ~1% of a shrunk full model's parameters.
GradCheckReport run_gradcheck(int seeds, bool e2e, std::ostream* progress);

}  // namespace blink
