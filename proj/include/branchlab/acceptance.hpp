#pragma once

#include <string>
#include <vector>

namespace branchlab::acceptance {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

/// Runs the full acceptance sweep (analytic oracles, order chains, Monte
/// Carlo consistency, determinism) and returns one result per criterion.
/// `fast` shrinks the Monte Carlo sweep for smoke runs; the recorded
/// criteria always run at full scale when false.
std::vector<CriterionResult> run_all(bool fast = false);

/// Prints one PASS/FAIL line per criterion; returns true when all pass.
bool print_report(const std::vector<CriterionResult>& results);

}  // namespace branchlab::acceptance
