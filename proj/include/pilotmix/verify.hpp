#pragma once

// Built-in self-checks behind `pilotmix verify`: small reference values and
// constructed instances with known outcomes, grouped by module.

#include <iosfwd>
#include <string>
#include <vector>

namespace pilotmix {

struct CheckResult {
  std::string module;
  std::string name;
  bool passed = false;
  std::string detail;
};

std::vector<CheckResult> run_verification();

/// One "PASS|FAIL module name detail" line per check plus a per-module
/// summary. Returns true when everything passed.
bool report_verification(std::ostream& out, const std::vector<CheckResult>& results);

}  // namespace pilotmix
