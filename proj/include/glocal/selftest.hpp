#pragma once

#include "glocal/config.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace glocal {

enum class CheckStatus { Pass, Warn, Fail };

struct CheckResult {
  std::string name;
  CheckStatus status = CheckStatus::Pass;
  double measured = 0.0;   // error or violation measured by the check
  double threshold = 0.0;  // bound it was compared against
  std::string detail;
};

struct SelftestReport {
  std::vector<CheckResult> checks;
  bool strict = false;

  int failures() const;
  int warnings() const;
  /// False on any failure, or on any warning when strict.
  bool passed() const;
  int exit_code() const { return passed() ? 0 : 1; }
  nlohmann::json to_json() const;
};

/// Runs every module's invariant checks and the gradient checks on seeded
/// inputs. The transport marginal check uses the configured solver settings
/// and reports a warning when the iteration budget runs out.
SelftestReport run_selftest(const PipelineConfig& cfg);

}  // namespace glocal
