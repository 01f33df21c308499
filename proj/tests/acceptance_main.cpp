#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <string>

#include "mbac/acceptance.hpp"

int main(int argc, char** argv) {
  std::string out = "acceptance_out";
  int workers = 0;
  for (int i = 1; i + 1 < argc; ++i) {
    if (!std::strcmp(argv[i], "--out")) out = argv[i + 1];
    if (!std::strcmp(argv[i], "--workers")) workers = std::atoi(argv[i + 1]);
  }
  std::filesystem::create_directories(out);

  const std::vector<mbac::CriterionResult> results =
      mbac::run_acceptance(out, workers);
  int failed = 0;
  for (const mbac::CriterionResult& r : results) {
    std::printf("[%s] %d %-34s %s\n", r.passed ? "PASS" : "FAIL", r.index,
                r.name.c_str(), r.detail.c_str());
    if (!r.passed) ++failed;
  }
  std::printf("%zu/%zu criteria passed\n", results.size() - failed,
              results.size());
  return failed == 0 ? 0 : 1;
}
