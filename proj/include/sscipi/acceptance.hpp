#ifndef SSCIPI_ACCEPTANCE_HPP
#define SSCIPI_ACCEPTANCE_HPP

#include <string>
#include <vector>

namespace sscipi {

struct CriterionResult {
  int id = 0;
  std::string title;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct AcceptanceOptions {
  int threads = 0;       // 0: SSCIPI_THREADS or hardware concurrency
  std::string work_dir;  // scratch space for file outputs; empty = temp dir
};

inline constexpr int kCriterionCount = 12;

/// Runs criterion `id` (1..12). Exceptions are reported as failures.
CriterionResult run_criterion(int id, const AcceptanceOptions& options);

/// "PASS  3  title: detail (seconds)"
std::string format_result(const CriterionResult& r);

}  // namespace sscipi

#endif  // SSCIPI_ACCEPTANCE_HPP
