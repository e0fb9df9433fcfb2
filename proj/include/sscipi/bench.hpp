#ifndef SSCIPI_BENCH_HPP
#define SSCIPI_BENCH_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sscipi/baselines.hpp"
#include "sscipi/data.hpp"
#include "sscipi/klnmf.hpp"

namespace sscipi {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Work pool

/// Worker count from SSCIPI_THREADS, else the hardware concurrency.
int worker_threads();

/// Runs fn(0..n-1) on up to `threads` workers (0 = worker_threads()).
/// Results must go to per-index slots; the first exception is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, int threads = 0);

// ---------------------------------------------------------------------------
// Configuration

struct GridPoint {
  double batch_proportion = 1.0;
  Index epoch_length = 1;
  double step_size = 1.0;
};

struct ExperimentGrid {
  std::vector<double> batch_proportions{1e-4, 1e-3, 1e-2, 0.1, 1.0};
  std::vector<Index> epoch_lengths{10, 100, 1000};
  std::vector<double> step_sizes{0.01, 0.1, 1.0};
  int replicates = 10;
  Index rank = 20;
  Budget budget;  // per run

  void validate() const;
  std::vector<GridPoint> points() const;
};

/// Solver names: s-sci-pi, vanilla-sci-pi, f-sci-pi, mu, ccd, scd, pgd.
struct SolverSpec {
  std::string name = "s-sci-pi";
  Scheme scheme = Scheme::one_step;
  std::optional<SamplingMode> mode;  // default: by density of V
  bool clamp = true;
  bool replacement = false;

  /// Whether the grid's (s/n, m, eta) affect this solver.
  bool uses_grid() const;
  std::string label() const;
};

inline const std::vector<std::string>& solver_names() {
  static const std::vector<std::string> names{"s-sci-pi", "vanilla-sci-pi", "f-sci-pi",
                                              "mu", "ccd", "scd", "pgd"};
  return names;
}

std::unique_ptr<FactorUpdater> make_updater(const SolverSpec& solver, const GridPoint& point,
                                            const CountMatrix& v, std::uint64_t seed);

/// Time axis used for aggregation and emission. `work` counts gradient-sample
/// evaluations and is deterministic; `wall` is solver seconds.
enum class Clock { wall, work };

std::string to_string(Clock c);
Clock clock_from_string(const std::string& s);
double clock_value(const TraceRecord& r, Clock c);

struct RunOptions {
  Index rank = 20;
  int replicates = 10;
  std::uint64_t master_seed = 0;
  Budget budget;
  Clock clock = Clock::wall;
  double exact_tolerance = 1e-10;
  Index exact_inner_cap = 10000;
  int objective_repeats = 1;
  int threads = 0;
};

// ---------------------------------------------------------------------------
// Initialization and reference objective

/// W, H i.i.d. Uniform(0,1) from the seed, then 5 alternating MU rounds.
FactorPair init_model(const CountMatrix& v, Index rank, std::uint64_t seed);

inline constexpr int kInitMuRounds = 5;

/// FNV-1a over the shape and the triplets of V.
std::uint64_t dataset_hash(const CountMatrix& v);

struct ReferenceBudget {
  std::int64_t mu_rounds = 2000;
  std::int64_t exact_rounds = 20;
  Index exact_inner_cap = 200;
  std::vector<std::uint64_t> seeds{0x5eed0, 0x5eed1, 0x5eed2};
};

struct ReferenceObjective {
  std::string dataset_id;
  Index rank = 0;
  double value = 0.0;
  std::string solver;
  std::uint64_t seed = 0;
  ReferenceBudget budget;
  bool low_confidence = false;
  int invalidations = 0;
};

/// Minimum objective over MU (one-step) and F-SCI-PI (exact) runs from each
/// seed. With a cache directory the value is reloaded when present and
/// written otherwise.
ReferenceObjective compute_reference(const CountMatrix& v, Index rank,
                                     const ReferenceBudget& budget = {},
                                     const std::optional<std::string>& cache_dir = {},
                                     int threads = 0);

std::string reference_cache_path(const std::string& cache_dir, const std::string& dataset_id,
                                 Index rank);
void save_reference(const ReferenceObjective& ref, const std::string& path);
std::optional<ReferenceObjective> load_reference(const std::string& path);

/// |f_t - f*| / |f_0 - f*|. Throws DegenerateMetricError when f_0 == f*.
double relative_error(double f_t, double f_0, double f_star);

/// Slack before an observed objective invalidates the reference.
inline constexpr double kReferenceSlack = 1e-9;

// ---------------------------------------------------------------------------
// Experiments

struct ReplicateRun {
  int replicate = 0;
  Trace trace;
  bool diverged = false;
  Index restarts = 0;
  Index clamped = 0;
};

struct AggregateCurve {
  std::vector<double> time;
  std::vector<double> mean;
  std::vector<double> median;
};

struct ExperimentResult {
  SolverSpec solver;
  GridPoint point;
  Clock clock = Clock::wall;
  std::vector<ReplicateRun> runs;
  AggregateCurve curve;
  std::vector<double> finals;  // final relative error per converging replicate
  double mean_final = std::numeric_limits<double>::quiet_NaN();
  double median_final = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::string> warnings;

  std::size_t diverged() const;
  bool all_diverged() const { return diverged() == runs.size(); }
};

ReplicateRun run_replicate(const CountMatrix& v, const SolverSpec& solver,
                           const GridPoint& point, const RunOptions& options, int replicate);

/// Fills relative errors of every record from f*.
void apply_reference(ExperimentResult& result, double f_star);

/// Mean and median curves on the union of record times, interpolating each
/// replicate linearly in log relative error; finals and warnings.
void aggregate(ExperimentResult& result);

/// Lowers f* to the best observed objective when some run beats it by more
/// than the slack, then recomputes every result. Returns true on invalidation.
bool reconcile_reference(ReferenceObjective& ref, std::vector<ExperimentResult>& results);

ExperimentResult run_experiment(const CountMatrix& v, const SolverSpec& solver,
                                const GridPoint& point, const RunOptions& options,
                                ReferenceObjective& ref);

struct GridSearchResult {
  std::vector<ExperimentResult> table;
  std::size_t best = 0;
};

/// Lowest mean final relative error; ties go to smaller eta, then smaller m,
/// then larger s/n. Solvers without grid parameters get a single point.
GridSearchResult grid_search(const CountMatrix& v, const SolverSpec& solver,
                             const ExperimentGrid& grid, const RunOptions& options,
                             ReferenceObjective& ref);

std::size_t select_best(const std::vector<ExperimentResult>& table);

/// First clock value at which the trace reaches the target relative error.
std::optional<double> clock_to_reach(const Trace& trace, double target, Clock clock);

// ---------------------------------------------------------------------------
// Emission

/// Long form: one row per trace record.
void write_results_csv(const std::vector<ExperimentResult>& results, std::ostream& out);
/// Groups rows back into results and re-aggregates them.
std::vector<ExperimentResult> read_results_csv(std::istream& in);

json summary_json(const std::vector<ExperimentResult>& results,
                  const ReferenceObjective* ref = nullptr);

struct SvgOptions {
  int width = 720;
  int height = 360;
  double min_time = 0.0;  // axis truncation: drop points before this time
};

/// Left panel: mean relative error vs time (log y). Right panel: boxplots of
/// final errors per configuration.
void write_svg(const std::vector<ExperimentResult>& results, std::ostream& out,
               const SvgOptions& options = {});

// ---------------------------------------------------------------------------
// Grid runs from a JSON config

struct DataSource {
  std::optional<SyntheticSpec> synthetic;
  std::string path;
  std::string format = "uci";
  double min_sum = 0.0;  // preprocess_min_sum threshold; 0 keeps everything
};

CountMatrix load_source(const DataSource& source, DatasetManifest* manifest = nullptr);

struct GridConfig {
  DataSource data;
  std::vector<SolverSpec> solvers{SolverSpec{}};
  ExperimentGrid grid;
  std::uint64_t seed = 0;
  Clock clock = Clock::work;
  ReferenceBudget reference;
  std::optional<std::string> cache_dir;
  double exact_tolerance = 1e-10;
  Index exact_inner_cap = 10000;
};

struct GridOutputs {
  DatasetManifest manifest;
  ReferenceObjective reference;
  std::vector<ExperimentResult> table;  // every solver and grid point
  std::vector<std::size_t> best;        // index into table, one per solver
};

GridOutputs run_grid(const GridConfig& config, int threads = 0);

/// Writes <prefix>.csv (all traces), <prefix>.json (summary) and
/// <prefix>.svg (best point per solver).
void write_grid_outputs(const GridOutputs& outputs, const std::string& prefix);

// ---------------------------------------------------------------------------
// Model checkpoint

struct Checkpoint {
  FactorPair model;
  json config;
};

/// JSON with N, M, K, row-major W and H and the run configuration.
void save_checkpoint(const std::string& path, const FactorPair& model, const json& config);
Checkpoint load_checkpoint(const std::string& path);

// ---------------------------------------------------------------------------
// JSON mirrors of the configuration types

void to_json(json& j, const GridPoint& p);
void from_json(const json& j, GridPoint& p);
void to_json(json& j, const Budget& b);
void from_json(const json& j, Budget& b);
void to_json(json& j, const ExperimentGrid& g);
void from_json(const json& j, ExperimentGrid& g);
void to_json(json& j, const SolverSpec& s);
void from_json(const json& j, SolverSpec& s);
void to_json(json& j, const SyntheticSpec& s);
void from_json(const json& j, SyntheticSpec& s);
void to_json(json& j, const ReferenceBudget& b);
void from_json(const json& j, ReferenceBudget& b);
void to_json(json& j, const DataSource& d);
void from_json(const json& j, DataSource& d);
void to_json(json& j, const GridConfig& c);
void from_json(const json& j, GridConfig& c);
void to_json(json& j, const DatasetManifest& m);

std::string to_string(SamplingMode m);
SamplingMode sampling_mode_from_string(const std::string& s);
std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);

/// "%.17g"
std::string format_real(double x);

}  // namespace sscipi

#endif  // SSCIPI_BENCH_HPP
