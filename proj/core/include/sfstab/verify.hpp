#pragma once
// Property suites run by `sfstab verify`.

#include <cstdint>
#include <string>
#include <vector>

namespace sfstab {

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::size_t samples = 0;
  double max_error = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

std::vector<std::string> suite_names();

/// Throws PreconditionError for an unknown suite name.
SuiteResult run_suite(const std::string& name, std::uint64_t seed);

std::vector<SuiteResult> run_all_suites(std::uint64_t seed, std::size_t jobs = 1);

/// `name pass|FAIL samples=.. max_err=.. tol=.. detail`
std::string format_result(const SuiteResult& r);

}  // namespace sfstab
