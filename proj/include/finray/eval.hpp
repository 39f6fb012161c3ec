#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace finray {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string measured;
  std::string threshold;
  double seconds = 0.0;
};

struct AcceptanceOptions {
  std::filesystem::path workdir;
  std::uint64_t seed = 1729;
  int store_frames = 900;  // reference walk length
  int workers = 2;
  std::vector<int> only;   // empty: every criterion
};

/// Runs the acceptance battery on simulator data written under `workdir`.
/// Progress goes to `log`; one result per criterion is returned.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opt, std::ostream& log);

/// One "PASS"/"FAIL" line per criterion with measured value and threshold.
void print_report(std::ostream& os, const std::vector<CriterionResult>& results);

}  // namespace finray
