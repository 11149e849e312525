#pragma once

#include <set>
#include <string>
#include <vector>

#include "ntg/harness.hpp"

namespace ntg {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string details;
  double seconds = 0.0;
};

struct AcceptanceReport {
  std::vector<CriterionResult> results;
  bool all_pass = true;
};

// Runs the acceptance criteria end to end with the given configuration,
// writing artifacts under out_dir. `only` restricts to a subset of criterion
// ids (empty = all ten). Prints one PASS/FAIL line per criterion to stdout.
AcceptanceReport run_acceptance(const ExperimentConfig& cfg, const std::string& out_dir,
                                const std::set<int>& only = {});

}  // namespace ntg
