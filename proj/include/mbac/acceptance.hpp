#pragma once

#include <string>
#include <vector>

namespace mbac {

struct CriterionResult {
  int index = 0;
  std::string name;
  bool passed = false;
  std::string detail;  // measured numbers plus the pinned gates
};

/**
 * Runs the nine acceptance criteria in order, writing every CSV/JSON artifact
 * under out_dir (deterministic content, no timestamps). Failures never throw;
 * they are reported through the returned records.
 */
std::vector<CriterionResult> run_acceptance(const std::string& out_dir,
                                            int workers);

}  // namespace mbac
