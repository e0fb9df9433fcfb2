#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "sscipi/acceptance.hpp"

// Usage: sscipi_acceptance [--work-dir DIR] [criterion ids...]
int main(int argc, char** argv) {
  sscipi::AcceptanceOptions options;
  std::vector<int> ids;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--work-dir" && i + 1 < argc) {
      options.work_dir = argv[++i];
    } else {
      ids.push_back(std::atoi(arg.c_str()));
    }
  }
  if (ids.empty()) {
    for (int id = 1; id <= sscipi::kCriterionCount; ++id) ids.push_back(id);
  }
  int failed = 0;
  for (int id : ids) {
    const auto r = sscipi::run_criterion(id, options);
    std::printf("%s\n", sscipi::format_result(r).c_str());
    std::fflush(stdout);
    if (!r.pass) ++failed;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(ids.size()) - failed, ids.size());
  return failed == 0 ? 0 : 1;
}
