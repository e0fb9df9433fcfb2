#ifndef SSCIPI_SCIPI_HPP
#define SSCIPI_SCIPI_HPP

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sscipi/matrix.hpp"
#include "sscipi/sampling.hpp"
#include "sscipi/trace.hpp"

namespace sscipi {

/// Finite-sum scale-invariant objective f = (1/n) sum_l f_l, maximized on the
/// unit sphere.
///
/// Every f_l shares the degree p: grad f_l(c x) = c^{p-1} grad f_l(x) for
/// c > 0, with p = 0 for additive (log-type) invariance.
template <typename Scalar>
class ScaleInvariantProblem {
 public:
  using VectorType = Vector<Scalar>;

  virtual ~ScaleInvariantProblem() = default;

  virtual Index dimension() const = 0;
  virtual Index sample_count() const = 0;
  virtual Scalar degree() const = 0;

  virtual Scalar value(const VectorType& x) const = 0;
  virtual VectorType grad_sample(Index l, const VectorType& x) const = 0;
  /// f_l(x); used by finite-difference checks of single samples.
  virtual Scalar value_sample(Index l, const VectorType& x) const = 0;

  /// Mean of grad_sample over the batch (duplicates count repeatedly).
  virtual VectorType grad_batch(std::span<const Index> batch,
                                const VectorType& x) const {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    VectorType sum = VectorType::Zero(dimension());
    for (Index l : batch) sum += grad_sample(l, x);
    return sum / static_cast<Scalar>(batch.size());
  }

  /// grad_batch over all samples. Overrides must keep this identity exact.
  VectorType grad_full(const VectorType& x) const {
    std::vector<Index> all(static_cast<std::size_t>(sample_count()));
    std::iota(all.begin(), all.end(), Index{0});
    return grad_batch(all, x);
  }
};

enum class Termination { tolerance, budget, epochs, degenerate_snapshot };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::tolerance: return "tolerance";
    case Termination::budget: return "budget";
    case Termination::epochs: return "epochs";
    case Termination::degenerate_snapshot: return "degenerate-snapshot";
  }
  return "unknown";
}

struct SolverConfig {
  double step_size = 1.0;  // eta in (0, 1]
  Index batch_size = 1;    // s in [1, n]
  Index epoch_length = 1;  // m
  Index max_epochs = 100;
  double objective_tolerance = 0.0;
  std::optional<std::chrono::duration<double>> time_budget;
  std::uint64_t seed = 0;
  bool replacement = false;
  /// Clamp g_t at zero before the inner step (KL subproblems in y-space).
  bool nonnegative_gradient = false;

  void validate(Index n) const {
    if (!(step_size > 0.0 && step_size <= 1.0)) {
      throw std::invalid_argument("step size must lie in (0, 1]");
    }
    if (batch_size < 1 || batch_size > n) {
      throw std::invalid_argument("batch size must lie in [1, n]");
    }
    if (epoch_length < 1) throw std::invalid_argument("epoch length must be >= 1");
    if (max_epochs < 0) throw std::invalid_argument("negative epoch cap");
    if (!(objective_tolerance >= 0.0)) {
      throw std::invalid_argument("objective tolerance must be nonnegative");
    }
  }
};

template <typename Scalar>
struct SolveOutcome {
  Vector<Scalar> x;
  Index epochs_used = 0;
  Index restarts = 0;  // epochs aborted by the snapshot dot-floor
  Trace trace;
  Termination termination = Termination::epochs;
};

/// Snapshot overlap below this fraction of ||x_t|| ||x_0|| aborts the epoch.
inline constexpr double kSnapshotDotFloor = 1e-8;
/// Inside an epoch the iterate is renormalized when its norm leaves
/// [2^-64, 2^64].
inline constexpr double kNormWindowLow = 0x1.0p-64;
inline constexpr double kNormWindowHigh = 0x1.0p64;

/// One SCI-PI step: grad f(x) / ||grad f(x)||.
template <typename Scalar>
Vector<Scalar> sci_pi_step(const ScaleInvariantProblem<Scalar>& problem,
                           const Vector<Scalar>& x) {
  Vector<Scalar> g = problem.grad_full(x);
  const Scalar norm = g.norm();
  if (!(norm > Scalar(0)) || !std::isfinite(norm)) {
    throw DegeneratePointError("gradient vanishes at the iterate");
  }
  return g / norm;
}

/// alpha_t = |x_t^T x_0|^{p-1} / ||x_0||^{2(p-1)}; empty when the overlap
/// falls to the dot-floor.
template <typename Scalar>
std::optional<Scalar> snapshot_alpha(const Vector<Scalar>& x_t,
                                     const Vector<Scalar>& x_0, Scalar p) {
  const Scalar dot = x_t.dot(x_0);
  const Scalar x0_sq = x_0.squaredNorm();
  if (!(dot > Scalar(kSnapshotDotFloor) * x_t.norm() * std::sqrt(x0_sq))) {
    return std::nullopt;
  }
  return std::pow(std::abs(dot), p - 1) / std::pow(x0_sq, p - 1);
}

/// alpha g~ + (1/s) sum_{l in S} [grad f_l(x_t) - alpha grad f_l(x_0)].
template <typename Scalar>
std::optional<Vector<Scalar>> svrg_gradient(
    const ScaleInvariantProblem<Scalar>& problem, const Vector<Scalar>& x_t,
    const Vector<Scalar>& x_0, const Vector<Scalar>& snapshot_gradient,
    std::span<const Index> batch, Scalar p) {
  const auto alpha = snapshot_alpha(x_t, x_0, p);
  if (!alpha) return std::nullopt;
  if (batch.empty()) throw std::invalid_argument("empty batch");
  Vector<Scalar> correction = Vector<Scalar>::Zero(x_t.size());
  for (Index l : batch) {
    correction += problem.grad_sample(l, x_t) - *alpha * problem.grad_sample(l, x_0);
  }
  return Vector<Scalar>(*alpha * snapshot_gradient +
                        correction / static_cast<Scalar>(batch.size()));
}

/// (1 - eta) x_t + eta g_t / ||x_t||^{p-2}.
template <typename Scalar>
Vector<Scalar> inner_step(const Vector<Scalar>& x_t, const Vector<Scalar>& g_t,
                          Scalar eta, Scalar p) {
  const Scalar norm = x_t.norm();
  if (!(norm > Scalar(0)) || !std::isfinite(norm)) {
    throw DegeneratePointError("inner iterate has zero or non-finite norm");
  }
  return (Scalar(1) - eta) * x_t + (eta / std::pow(norm, p - 2)) * g_t;
}

/// Called after every inner step with (epoch, t, x_{t+1}).
template <typename Scalar>
using InnerObserver = std::function<void(Index, Index, const Vector<Scalar>&)>;

/// Stochastic SCI-PI with SVRG-style variance reduction.
///
/// Each epoch snapshots the current iterate (renormalized), takes the full
/// gradient there and runs m sampled inner steps. The objective is evaluated
/// once per epoch and its cost is excluded from the time budget. Work is
/// counted in grad_sample evaluations.
template <typename Scalar>
SolveOutcome<Scalar> solve(const ScaleInvariantProblem<Scalar>& problem,
                           const SolverConfig& config, const Vector<Scalar>& x_init,
                           RngStream rng, const InnerObserver<Scalar>& observer = {}) {
  const Index n = problem.sample_count();
  config.validate(n);
  if (x_init.size() != problem.dimension()) {
    throw ShapeError("initial iterate has wrong dimension");
  }
  const Scalar init_norm = x_init.norm();
  if (!(init_norm > Scalar(0))) throw DegeneratePointError("zero initial iterate");

  const Scalar p = problem.degree();
  const Scalar eta = static_cast<Scalar>(config.step_size);

  SolveOutcome<Scalar> out;
  out.x = x_init / init_norm;
  out.trace.solver = "s-sci-pi";
  out.trace.seed = config.seed;

  Stopwatch watch;
  double work = 0.0;
  Scalar previous = problem.value(out.x);
  out.trace.records.push_back({0.0, 0, 0.0, static_cast<double>(previous)});
  watch.start();

  for (Index epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const Vector<Scalar> x0 = out.x / out.x.norm();
    const Vector<Scalar> g_snap = problem.grad_full(x0);
    work += static_cast<double>(n);
    if (!(g_snap.norm() > Scalar(0))) {
      out.termination = Termination::degenerate_snapshot;
      break;
    }
    Vector<Scalar> x = x0;
    Index taken = 0;
    for (Index t = 0; t < config.epoch_length; ++t) {
      const auto batch = sample_rows(n, config.batch_size, rng, config.replacement);
      auto g = svrg_gradient(problem, x, x0, g_snap, batch, p);
      if (!g) break;
      work += 2.0 * static_cast<double>(batch.size());
      if (config.nonnegative_gradient) *g = g->cwiseMax(Scalar(0));
      Vector<Scalar> next = inner_step(x, *g, eta, p);
      const Scalar norm = next.norm();
      if (!(norm > Scalar(0)) || !std::isfinite(norm)) break;
      if (norm < Scalar(kNormWindowLow) || norm > Scalar(kNormWindowHigh)) {
        next /= norm;
      }
      x = std::move(next);
      ++taken;
      if (observer) observer(epoch, t, x);
    }
    out.epochs_used = epoch;
    if (taken < config.epoch_length) ++out.restarts;
    if (taken == 0) {
      out.termination = Termination::degenerate_snapshot;
      break;
    }
    out.x = x / x.norm();

    Scalar current;
    {
      PausedScope pause(watch);
      current = problem.value(out.x);
      out.trace.records.push_back(
          {watch.seconds(), static_cast<std::int64_t>(epoch), work,
           static_cast<double>(current)});
    }
    if (std::abs(current - previous) <
        Scalar(config.objective_tolerance) * std::max(Scalar(1), std::abs(current))) {
      out.termination = Termination::tolerance;
      return out;
    }
    if (config.time_budget && watch.seconds() >= config.time_budget->count()) {
      out.termination = Termination::budget;
      return out;
    }
    previous = current;
  }
  if (out.termination != Termination::degenerate_snapshot) {
    out.termination = Termination::epochs;
  }
  return out;
}

template <typename Scalar>
SolveOutcome<Scalar> solve(const ScaleInvariantProblem<Scalar>& problem,
                           const SolverConfig& config, const Vector<Scalar>& x_init) {
  return solve(problem, config, x_init, RngStream(config.seed));
}

}  // namespace sscipi

#endif  // SSCIPI_SCIPI_HPP
