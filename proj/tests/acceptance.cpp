// Acceptance suite A1-A9; exits nonzero when any check fails.

#include <iostream>

#include "maips/acceptance.hpp"
#include "maips/experiments.hpp"

int main(int argc, char **argv) {
  maips::SuiteOptions o;
  o.config = maips::default_config();
  o.workers = maips::default_workers();
  for (int i = 1; i < argc; ++i) o.only.emplace_back(argv[i]);
  const auto results = maips::run_suite(o, [](const maips::CheckResult &r) {
    std::cout << maips::format_check(r) << std::endl;
  });
  int passed = 0;
  for (const auto &r : results) passed += r.pass ? 1 : 0;
  std::cout << "summary: " << passed << "/" << results.size() << " checks passed\n";
  return passed == static_cast<int>(results.size()) ? 0 : 1;
}
