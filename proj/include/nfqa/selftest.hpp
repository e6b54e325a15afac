#pragma once
// Offline acceptance checks: oracle-equivalence and property suites that
// exercise the whole pipeline with mock judges. Each check prints one
// PASS/FAIL line; the binary exit code is the conjunction. The CLI selftest
// subcommand and the acceptance test target share these.

#include <ostream>
#include <string>
#include <vector>

namespace nfqa {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;  // reported numbers, or the failure reason
  double seconds = 0.0;
};

// Runs every check, streaming one result line to `out` as each finishes.
// scratch_dir receives cache files and report directories; it is created if
// missing. `filter` restricts to checks whose name contains it.
std::vector<CheckResult> run_acceptance_checks(std::ostream& out,
                                               const std::string& scratch_dir,
                                               const std::string& filter = "");

bool all_passed(const std::vector<CheckResult>& results);

}  // namespace nfqa
