#ifndef SSCIPI_TRACE_HPP
#define SSCIPI_TRACE_HPP

#include <chrono>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace sscipi {

struct TraceRecord {
  double seconds = 0.0;  // solver time since start, bookkeeping excluded
  std::int64_t round = 0;
  double work = 0.0;     // cumulative gradient-sample evaluations
  double objective = 0.0;
  double relative_error = std::numeric_limits<double>::quiet_NaN();
};

struct Trace {
  std::string solver;
  std::uint64_t seed = 0;
  std::vector<TraceRecord> records;
};

/// Accumulates wall time only while running.
class Stopwatch {
 public:
  using clock = std::chrono::steady_clock;

  void start() {
    if (!running_) {
      running_ = true;
      since_ = clock::now();
    }
  }
  void stop() {
    if (running_) {
      elapsed_ += clock::now() - since_;
      running_ = false;
    }
  }
  double seconds() const {
    auto total = elapsed_;
    if (running_) total += clock::now() - since_;
    return std::chrono::duration<double>(total).count();
  }

 private:
  bool running_ = false;
  clock::time_point since_{};
  clock::duration elapsed_{};
};

/// Stops the watch for the lifetime of the guard.
class PausedScope {
 public:
  explicit PausedScope(Stopwatch& w) : w_(w) { w_.stop(); }
  ~PausedScope() { w_.start(); }
  PausedScope(const PausedScope&) = delete;
  PausedScope& operator=(const PausedScope&) = delete;

 private:
  Stopwatch& w_;
};

}  // namespace sscipi

#endif  // SSCIPI_TRACE_HPP
