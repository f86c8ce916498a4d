#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "maips/config.hpp"
#include "maips/experiments.hpp"

namespace maips {

struct CheckResult {
  std::string id;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

/// One line: "<id> PASS|FAIL <detail> (<seconds> s)".
std::string format_check(const CheckResult &r);

CheckResult check_detailed_balance(std::uint64_t seed, int pairs = 10000);  // A1
CheckResult check_matrix_invariance(const BiasLabResult &r, double seconds);  // A2
CheckResult check_discrete_example();                                       // A3
CheckResult check_bimodal(const Exp1Result &r, double seconds);              // A4
CheckResult check_gaussian_quantile(const Exp2Result &r, double seconds);    // A5
CheckResult check_cost_table();                                              // A6
CheckResult check_inverse_problem(const Exp3Result &r, double seconds);      // A7
CheckResult check_gradients(const Config &cfg, std::uint64_t seed);          // A8
CheckResult check_analytic(std::uint64_t seed);                              // A9

struct SuiteOptions {
  Config config = default_config();
  int workers = 1;
  std::optional<std::filesystem::path> out;  // CSVs of each experiment
  std::vector<std::string> only;             // ids to run; empty runs all
};

/// Runs the checks in order, calling `report` after each.
std::vector<CheckResult> run_suite(const SuiteOptions &options,
                                   const std::function<void(const CheckResult &)> &report);

} // namespace maips
