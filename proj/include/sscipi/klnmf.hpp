#ifndef SSCIPI_KLNMF_HPP
#define SSCIPI_KLNMF_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sscipi/matrix.hpp"
#include "sscipi/problems.hpp"
#include "sscipi/sampling.hpp"
#include "sscipi/trace.hpp"

namespace sscipi {

using DMatrix = Matrix<double>;
using DVector = Vector<double>;
using CountMatrix = SparseCountMatrix<double>;

/// Factor entries are floored here after every simplex recovery.
inline constexpr double kFactorFloor = 1e-100;

struct FactorPair {
  DMatrix W;  // N x K
  DMatrix H;  // K x M
  Index rank() const { return W.cols(); }
};

/// Which factor an update targets; part of every derived RNG stream path.
enum class FactorTag : std::uint64_t { H = 0, W = 1 };

/// Per-column simplex subproblems for the H update given W.
///
/// Column j maximizes sum_i V_ij log (L X_j)_i over the simplex, with
/// L = W normalized to unit column sums and X_j = Y_j^2 entrywise.
struct SubproblemBundle {
  DMatrix L;            // N x K, column-stochastic
  DVector w_col_sums;   // K
  DVector v_col_sums;   // M
  DMatrix Y;            // K x M, unit columns
};

/// Y starts at the uniform point 1/sqrt(K) in every column.
SubproblemBundle build_subproblems(const CountMatrix& v, const DMatrix& w);
/// Y starts from the current H: X_j = normalize(c .* H_j).
SubproblemBundle build_subproblems(const CountMatrix& v, const DMatrix& w,
                                   const DMatrix& h);

/// Column j as a standalone degree-0 problem in y-coordinates.
MixtureProblem<double> column_problem(const SubproblemBundle& bundle,
                                      const CountMatrix& v, Index j,
                                      SamplingMode mode);

/// H_kj = (sum_i V_ij / sum_i W_ik) X_jk with X = Y^2.
DMatrix recover_H(const SubproblemBundle& bundle);

struct ClampResult {
  DVector values;
  Index clamped = 0;
};

/// Entrywise max(g, 0) with a count of clamped entries.
ClampResult clamp_multiplier(const DVector& g);

struct StochasticConfig {
  double step_size = 1.0;         // eta
  double batch_proportion = 1.0;  // s/n
  Index epoch_length = 1;         // m
  SamplingMode mode = SamplingMode::element;
  bool replacement = false;
  bool clamp = true;
  std::uint64_t seed = 0;
};

/// Row mode batch: s = round(prop * N) clamped into [1, N].
Index batch_size_for(double proportion, Index population);

/// Stream shared by all columns in row mode. `inner` counts repeated
/// subproblem iterations within one round (exact scheme).
RngStream round_stream(std::uint64_t seed, FactorTag tag, std::int64_t round,
                       std::int64_t inner = 0);
/// Stream for column j in element mode.
RngStream column_stream(std::uint64_t seed, FactorTag tag, std::int64_t round,
                        std::int64_t inner, Index j);

struct EpochReport {
  Index restarts = 0;  // columns whose epoch ended on the dot-floor or a zero step
  Index clamped = 0;   // negative gradient entries clamped to zero
  std::vector<Index> empty_columns;  // columns of V with no nonzeros; left untouched
  double work = 0.0;   // gradient-sample evaluations
};

/// One S-SCI-PI epoch on every column of the bundle, batched over columns.
/// Y is updated in place and renormalized per column at the end.
EpochReport svrg_epoch_all_columns(SubproblemBundle& bundle, const CountMatrix& v,
                                   const StochasticConfig& config, FactorTag tag,
                                   std::int64_t round, std::int64_t inner = 0);

/// Batch for the multiplicative (non-variance-reduced) update: row indices in
/// row mode, triplet indices of V in element mode.
struct VanillaBatch {
  SamplingMode mode = SamplingMode::element;
  std::vector<Index> indices;
};

struct VanillaResult {
  DMatrix X;
  Index clamped = 0;
};

/// X_kj <- X_kj [max(0, (1 - eta) + eta m_kj(S))]^2, then column-rescale.
///
/// m_kj(S) is the sampled multiplier sum_{i in S} L_ik V_ij / (L X)_ij scaled
/// by n/s (row) or |I|/s (element) and divided by sum_i V_ij, so the full
/// batch gives m = 1 at the subproblem optimum. Columns without sampled
/// entries are left unchanged.
VanillaResult vanilla_stochastic_update_H(const CountMatrix& v, const DMatrix& l,
                                          const DMatrix& x, const VanillaBatch& batch,
                                          double eta);

// ---------------------------------------------------------------------------
// Solver interface and alternating minimization

struct UpdateContext {
  FactorTag tag = FactorTag::H;
  std::int64_t round = 0;
  std::int64_t inner = 0;
  /// True for repeated calls on an unchanged subproblem (exact scheme).
  bool continuing = false;
  double work = 0.0;
  Index restarts = 0;
  Index clamped = 0;
};

/// One iteration of an H-subproblem solver given W. W updates reuse it on
/// the transposed problem.
class FactorUpdater {
 public:
  virtual ~FactorUpdater() = default;
  virtual std::string name() const = 0;
  virtual void update_H(const CountMatrix& v, const DMatrix& w, DMatrix& h,
                        UpdateContext& ctx) = 0;
};

/// S-SCI-PI: one epoch per call.
class StochasticScipiUpdater final : public FactorUpdater {
 public:
  explicit StochasticScipiUpdater(StochasticConfig config) : config_(config) {}
  std::string name() const override { return "s-sci-pi"; }
  void update_H(const CountMatrix& v, const DMatrix& w, DMatrix& h,
                UpdateContext& ctx) override;
  const StochasticConfig& config() const { return config_; }

 private:
  StochasticConfig config_;
};

/// F-SCI-PI: one full multiplier pass, X <- rescale(X .* m^2).
class FullScipiUpdater final : public FactorUpdater {
 public:
  std::string name() const override { return "f-sci-pi"; }
  void update_H(const CountMatrix& v, const DMatrix& w, DMatrix& h,
                UpdateContext& ctx) override;
};

/// Multiplicative stochastic update without variance reduction.
class VanillaStochasticUpdater final : public FactorUpdater {
 public:
  explicit VanillaStochasticUpdater(StochasticConfig config) : config_(config) {}
  std::string name() const override { return "vanilla-sci-pi"; }
  void update_H(const CountMatrix& v, const DMatrix& w, DMatrix& h,
                UpdateContext& ctx) override;

 private:
  StochasticConfig config_;
};

/// Element mode when density < 0.5, row mode otherwise.
SamplingMode default_sampling_mode(const CountMatrix& v);

/// Runs `updater` on the transposed problem: W^T plays the role of H.
void update_W(const CountMatrix& v_transposed, FactorPair& model,
              FactorUpdater& updater, UpdateContext& ctx);

/// Replaces all-zero columns of W and rows of H by the stability floor.
void stabilize(FactorPair& model);

enum class Scheme { one_step, exact };

struct Budget {
  std::int64_t max_rounds = 100;
  std::optional<double> max_seconds;
  std::optional<double> max_work;
};

struct AlternateOptions {
  Scheme scheme = Scheme::one_step;
  Budget budget;
  double exact_tolerance = 1e-10;
  Index exact_inner_cap = 10000;
  /// Instrumentation: objective evaluated this many times per record.
  int objective_repeats = 1;
  std::string solver_name;
  std::uint64_t seed = 0;
};

struct AlternateResult {
  FactorPair model;
  Trace trace;
  Index restarts = 0;
  Index clamped = 0;
  Index inner_iterations = 0;  // exact scheme: subproblem iterations used
};

/// Updates H given W, then W given H, once per round. The trace gets one
/// record per round plus the initial state; objective evaluation is
/// excluded from the timed spans.
AlternateResult alternate(const CountMatrix& v, FactorPair model, FactorUpdater& h_solver,
                          FactorUpdater& w_solver, const AlternateOptions& options);

}  // namespace sscipi

#endif  // SSCIPI_KLNMF_HPP
