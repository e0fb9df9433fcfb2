#include "sscipi/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace sscipi {

namespace {

constexpr std::uint64_t kInitTag = 0x1417;
constexpr double kLogFloor = 1e-300;

double median_of(std::vector<double> x) {
  if (x.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  return n % 2 == 1 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
}

double quantile_of(std::vector<double> x, double q) {
  if (x.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(x.begin(), x.end());
  const double pos = q * static_cast<double>(x.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (pos - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

bool trace_diverged(const Trace& t) {
  return std::any_of(t.records.begin(), t.records.end(),
                     [](const TraceRecord& r) { return !std::isfinite(r.objective); });
}

double min_objective(const Trace& t) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : t.records) {
    if (std::isfinite(r.objective)) best = std::min(best, r.objective);
  }
  return best;
}

std::string hex_real(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", x);
  return buf;
}

}  // namespace

std::string format_real(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// ---------------------------------------------------------------------------
// Work pool

int worker_threads() {
  if (const char* env = std::getenv("SSCIPI_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, int threads) {
  if (threads <= 0) threads = worker_threads();
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto body = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n);
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// Configuration

void ExperimentGrid::validate() const {
  if (batch_proportions.empty() || epoch_lengths.empty() || step_sizes.empty()) {
    throw std::invalid_argument("empty grid");
  }
  for (double p : batch_proportions) {
    if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("batch proportion outside (0, 1]");
  }
  for (Index m : epoch_lengths) {
    if (m < 1) throw std::invalid_argument("epoch length must be positive");
  }
  for (double e : step_sizes) {
    if (!(e > 0.0 && e <= 1.0)) throw std::invalid_argument("step size outside (0, 1]");
  }
  if (replicates < 1) throw std::invalid_argument("replicates must be positive");
  if (rank < 1) throw std::invalid_argument("rank must be positive");
}

std::vector<GridPoint> ExperimentGrid::points() const {
  std::vector<GridPoint> out;
  for (double p : batch_proportions) {
    for (Index m : epoch_lengths) {
      for (double e : step_sizes) out.push_back({p, m, e});
    }
  }
  return out;
}

bool SolverSpec::uses_grid() const { return name == "s-sci-pi" || name == "vanilla-sci-pi"; }

std::string SolverSpec::label() const {
  std::string out = name;
  if (scheme == Scheme::exact) out += "/exact";
  if (mode) out += "/" + to_string(*mode);
  return out;
}

std::unique_ptr<FactorUpdater> make_updater(const SolverSpec& solver, const GridPoint& point,
                                            const CountMatrix& v, std::uint64_t seed) {
  StochasticConfig cfg;
  cfg.step_size = point.step_size;
  cfg.batch_proportion = point.batch_proportion;
  cfg.epoch_length = point.epoch_length;
  cfg.mode = solver.mode.value_or(default_sampling_mode(v));
  cfg.replacement = solver.replacement;
  cfg.clamp = solver.clamp;
  cfg.seed = seed;
  if (solver.name == "s-sci-pi") return std::make_unique<StochasticScipiUpdater>(cfg);
  if (solver.name == "vanilla-sci-pi") return std::make_unique<VanillaStochasticUpdater>(cfg);
  if (solver.name == "f-sci-pi") return std::make_unique<FullScipiUpdater>();
  if (solver.name == "mu") return std::make_unique<MuUpdater>();
  if (solver.name == "ccd") return std::make_unique<CcdUpdater>(false, seed);
  if (solver.name == "scd") return std::make_unique<CcdUpdater>(true, seed);
  if (solver.name == "pgd") return std::make_unique<PgdUpdater>();
  throw std::invalid_argument("unknown solver '" + solver.name + "'");
}

std::string to_string(Clock c) { return c == Clock::wall ? "wall" : "work"; }

Clock clock_from_string(const std::string& s) {
  if (s == "wall") return Clock::wall;
  if (s == "work") return Clock::work;
  throw std::invalid_argument("clock must be 'wall' or 'work'");
}

double clock_value(const TraceRecord& r, Clock c) {
  return c == Clock::wall ? r.seconds : r.work;
}

std::string to_string(SamplingMode m) { return m == SamplingMode::row ? "row" : "element"; }

SamplingMode sampling_mode_from_string(const std::string& s) {
  if (s == "row") return SamplingMode::row;
  if (s == "element") return SamplingMode::element;
  throw std::invalid_argument("sampling mode must be 'row' or 'element'");
}

std::string to_string(Scheme s) { return s == Scheme::one_step ? "one_step" : "exact"; }

Scheme scheme_from_string(const std::string& s) {
  if (s == "one_step" || s == "one-step") return Scheme::one_step;
  if (s == "exact") return Scheme::exact;
  throw std::invalid_argument("scheme must be 'one_step' or 'exact'");
}

// ---------------------------------------------------------------------------
// Initialization and reference

FactorPair init_model(const CountMatrix& v, Index rank, std::uint64_t seed) {
  if (rank < 1) throw std::invalid_argument("rank must be at least 1");
  const RngStream root(seed);
  RngStream rw = root.split(kInitTag, 0);
  RngStream rh = root.split(kInitTag, 1);
  FactorPair m;
  m.W.resize(v.rows(), rank);
  m.H.resize(rank, v.cols());
  for (Index i = 0; i < v.rows(); ++i) {
    for (Index k = 0; k < rank; ++k) m.W(i, k) = rw.uniform();
  }
  for (Index k = 0; k < rank; ++k) {
    for (Index j = 0; j < v.cols(); ++j) m.H(k, j) = rh.uniform();
  }
  const CountMatrix vt = v.transposed();
  for (int r = 0; r < kInitMuRounds; ++r) {
    m.H = mu_update_H(v, m.W, m.H);
    stabilize(m);
    DMatrix wt = mu_update_H(vt, m.H.transpose(), m.W.transpose());
    m.W = wt.transpose();
    stabilize(m);
  }
  return m;
}

std::uint64_t dataset_hash(const CountMatrix& v) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t x) {
    for (int b = 0; b < 8; ++b) {
      h ^= (x >> (8 * b)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  mix(static_cast<std::uint64_t>(v.rows()));
  mix(static_cast<std::uint64_t>(v.cols()));
  for (Index t = 0; t < v.nnz(); ++t) {
    mix(static_cast<std::uint64_t>(v.row(t)));
    mix(static_cast<std::uint64_t>(v.col(t)));
    std::uint64_t bits;
    const double x = v.value(t);
    std::memcpy(&bits, &x, sizeof bits);
    mix(bits);
  }
  return h;
}

std::string reference_cache_path(const std::string& cache_dir, const std::string& dataset_id,
                                 Index rank) {
  return (std::filesystem::path(cache_dir) /
          ("reference-" + dataset_id + "-K" + std::to_string(rank) + ".json"))
      .string();
}

void save_reference(const ReferenceObjective& ref, const std::string& path) {
  json j;
  j["dataset"] = ref.dataset_id;
  j["rank"] = ref.rank;
  j["value"] = ref.value;
  j["value_hex"] = hex_real(ref.value);
  j["solver"] = ref.solver;
  j["seed"] = ref.seed;
  j["budget"] = ref.budget;
  j["low_confidence"] = ref.low_confidence;
  j["invalidations"] = ref.invalidations;
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

std::optional<ReferenceObjective> load_reference(const std::string& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  const json j = json::parse(in);
  ReferenceObjective ref;
  ref.dataset_id = j.at("dataset").get<std::string>();
  ref.rank = j.at("rank").get<Index>();
  ref.value = std::strtod(j.at("value_hex").get<std::string>().c_str(), nullptr);
  ref.solver = j.value("solver", "");
  ref.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("budget")) ref.budget = j.at("budget").get<ReferenceBudget>();
  ref.low_confidence = j.value("low_confidence", false);
  ref.invalidations = j.value("invalidations", 0);
  return ref;
}

ReferenceObjective compute_reference(const CountMatrix& v, Index rank,
                                     const ReferenceBudget& budget,
                                     const std::optional<std::string>& cache_dir,
                                     int threads) {
  if (budget.mu_rounds <= 0 || budget.exact_rounds <= 0 || budget.exact_inner_cap <= 0 ||
      budget.seeds.empty()) {
    throw std::invalid_argument("reference budget must be positive");
  }
  char id[17];
  std::snprintf(id, sizeof id, "%016llx", static_cast<unsigned long long>(dataset_hash(v)));
  std::optional<std::string> path;
  if (cache_dir) {
    path = reference_cache_path(*cache_dir, id, rank);
    if (auto cached = load_reference(*path)) return *cached;
  }

  struct Candidate {
    double value = std::numeric_limits<double>::infinity();
    double last_change = 0.0;
    std::string solver;
    std::uint64_t seed = 0;
  };
  const std::size_t n_seeds = budget.seeds.size();
  std::vector<Candidate> found(2 * n_seeds);
  parallel_for(
      found.size(),
      [&](std::size_t task) {
        const std::uint64_t seed = budget.seeds[task / 2];
        const bool use_mu = task % 2 == 0;
        FactorPair model = init_model(v, rank, seed);
        AlternateOptions opt;
        opt.seed = seed;
        std::unique_ptr<FactorUpdater> hs, ws;
        if (use_mu) {
          hs = std::make_unique<MuUpdater>();
          ws = std::make_unique<MuUpdater>();
          opt.budget.max_rounds = budget.mu_rounds;
        } else {
          hs = std::make_unique<FullScipiUpdater>();
          ws = std::make_unique<FullScipiUpdater>();
          opt.scheme = Scheme::exact;
          opt.budget.max_rounds = budget.exact_rounds;
          opt.exact_inner_cap = budget.exact_inner_cap;
        }
        const AlternateResult res = alternate(v, std::move(model), *hs, *ws, opt);
        Candidate c;
        c.value = min_objective(res.trace);
        c.solver = use_mu ? "mu" : "f-sci-pi/exact";
        c.seed = seed;
        const auto& rec = res.trace.records;
        if (rec.size() >= 2) {
          const std::size_t back = std::max<std::size_t>(1, rec.size() / 10);
          const double old = rec[rec.size() - 1 - back].objective;
          c.last_change = std::abs(old - rec.back().objective) / std::max(1.0, std::abs(old));
        }
        found[task] = c;
      },
      threads);

  const auto best = std::min_element(found.begin(), found.end(),
                                     [](const Candidate& a, const Candidate& b) {
                                       return a.value < b.value;
                                     });
  ReferenceObjective ref;
  ref.dataset_id = id;
  ref.rank = rank;
  ref.value = best->value;
  ref.solver = best->solver;
  ref.seed = best->seed;
  ref.budget = budget;
  // Still moving by more than 1e-6 over the last tenth of the run.
  ref.low_confidence = !std::isfinite(best->value) || best->last_change > 1e-6;
  if (path) save_reference(ref, *path);
  return ref;
}

double relative_error(double f_t, double f_0, double f_star) {
  if (f_0 == f_star) throw DegenerateMetricError("relative error undefined: f_0 equals f*");
  return std::abs(f_t - f_star) / std::abs(f_0 - f_star);
}

// ---------------------------------------------------------------------------
// Experiments

std::size_t ExperimentResult::diverged() const {
  return static_cast<std::size_t>(
      std::count_if(runs.begin(), runs.end(), [](const ReplicateRun& r) { return r.diverged; }));
}

ReplicateRun run_replicate(const CountMatrix& v, const SolverSpec& solver,
                           const GridPoint& point, const RunOptions& options, int replicate) {
  const std::uint64_t seed = options.master_seed + static_cast<std::uint64_t>(replicate);
  FactorPair model = init_model(v, options.rank, seed);
  auto hs = make_updater(solver, point, v, seed);
  auto ws = make_updater(solver, point, v, seed);
  AlternateOptions opt;
  opt.scheme = solver.scheme;
  opt.budget = options.budget;
  opt.exact_tolerance = options.exact_tolerance;
  opt.exact_inner_cap = options.exact_inner_cap;
  opt.objective_repeats = options.objective_repeats;
  opt.solver_name = solver.label();
  opt.seed = seed;
  AlternateResult res = alternate(v, std::move(model), *hs, *ws, opt);
  ReplicateRun run;
  run.replicate = replicate;
  run.trace = std::move(res.trace);
  run.diverged = trace_diverged(run.trace);
  run.restarts = res.restarts;
  run.clamped = res.clamped;
  return run;
}

void apply_reference(ExperimentResult& result, double f_star) {
  for (auto& run : result.runs) {
    auto& rec = run.trace.records;
    if (rec.empty()) continue;
    const double f0 = rec.front().objective;
    for (auto& r : rec) {
      r.relative_error = std::isfinite(r.objective)
                             ? relative_error(r.objective, f0, f_star)
                             : std::numeric_limits<double>::infinity();
    }
  }
}

namespace {

/// log relative error of `rec` at time t, linear between records and held
/// constant outside the recorded range.
double log_error_at(const std::vector<TraceRecord>& rec, double t, Clock clock) {
  auto lg = [](double e) { return std::log(std::max(e, kLogFloor)); };
  auto after = std::upper_bound(rec.begin(), rec.end(), t,
                                [clock](double x, const TraceRecord& r) {
                                  return x < clock_value(r, clock);
                                });
  if (after == rec.begin()) return lg(rec.front().relative_error);
  if (after == rec.end()) return lg(rec.back().relative_error);
  const TraceRecord& a = *(after - 1);
  const TraceRecord& b = *after;
  const double ta = clock_value(a, clock);
  const double tb = clock_value(b, clock);
  const double w = (t - ta) / (tb - ta);
  return (1.0 - w) * lg(a.relative_error) + w * lg(b.relative_error);
}

}  // namespace

void aggregate(ExperimentResult& result) {
  result.curve = {};
  result.finals.clear();
  result.warnings.clear();
  std::vector<const ReplicateRun*> ok;
  for (const auto& run : result.runs) {
    if (run.diverged) {
      result.warnings.push_back("replicate " + std::to_string(run.replicate) +
                                " diverged; excluded from aggregates");
    } else if (!run.trace.records.empty()) {
      ok.push_back(&run);
    }
  }
  if (ok.empty()) {
    result.mean_final = result.median_final = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  std::vector<double> times;
  for (const auto* run : ok) {
    for (const auto& r : run->trace.records) times.push_back(clock_value(r, result.clock));
    result.finals.push_back(run->trace.records.back().relative_error);
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  // Sums run over sorted values so they do not depend on replicate order.
  std::vector<double> values(ok.size());
  for (double t : times) {
    for (std::size_t r = 0; r < ok.size(); ++r) {
      values[r] = std::exp(log_error_at(ok[r]->trace.records, t, result.clock));
    }
    std::vector<double> ordered = values;
    std::sort(ordered.begin(), ordered.end());
    double sum = 0.0;
    for (double x : ordered) sum += x;
    result.curve.time.push_back(t);
    result.curve.mean.push_back(sum / static_cast<double>(values.size()));
    result.curve.median.push_back(median_of(values));
  }
  std::vector<double> sorted = result.finals;
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (double x : sorted) sum += x;
  result.mean_final = sum / static_cast<double>(sorted.size());
  result.median_final = median_of(sorted);
}

bool reconcile_reference(ReferenceObjective& ref, std::vector<ExperimentResult>& results) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& res : results) {
    for (const auto& run : res.runs) {
      if (!run.diverged) best = std::min(best, min_objective(run.trace));
    }
  }
  const bool invalid = best < ref.value - kReferenceSlack;
  if (invalid) {
    ref.value = best;
    ref.solver = "observed";
    ++ref.invalidations;
  }
  for (auto& res : results) {
    apply_reference(res, ref.value);
    aggregate(res);
  }
  return invalid;
}

ExperimentResult run_experiment(const CountMatrix& v, const SolverSpec& solver,
                                const GridPoint& point, const RunOptions& options,
                                ReferenceObjective& ref) {
  if (options.replicates < 1) throw std::invalid_argument("replicates must be positive");
  ExperimentResult result;
  result.solver = solver;
  result.point = point;
  result.clock = options.clock;
  result.runs.resize(static_cast<std::size_t>(options.replicates));
  parallel_for(
      result.runs.size(),
      [&](std::size_t r) {
        result.runs[r] = run_replicate(v, solver, point, options, static_cast<int>(r));
      },
      options.threads);
  std::vector<ExperimentResult> one{std::move(result)};
  reconcile_reference(ref, one);
  return std::move(one.front());
}

std::size_t select_best(const std::vector<ExperimentResult>& table) {
  std::optional<std::size_t> best;
  auto better = [](const ExperimentResult& a, const ExperimentResult& b) {
    if (a.mean_final != b.mean_final) return a.mean_final < b.mean_final;
    if (a.point.step_size != b.point.step_size) return a.point.step_size < b.point.step_size;
    if (a.point.epoch_length != b.point.epoch_length) {
      return a.point.epoch_length < b.point.epoch_length;
    }
    return a.point.batch_proportion > b.point.batch_proportion;
  };
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (table[i].all_diverged() || std::isnan(table[i].mean_final)) continue;
    if (!best || better(table[i], table[*best])) best = i;
  }
  if (!best) throw std::runtime_error("grid search failed: every grid point diverged");
  return *best;
}

GridSearchResult grid_search(const CountMatrix& v, const SolverSpec& solver,
                             const ExperimentGrid& grid, const RunOptions& options,
                             ReferenceObjective& ref) {
  grid.validate();
  std::vector<GridPoint> points = solver.uses_grid() ? grid.points() : std::vector<GridPoint>{{}};
  if (solver.name == "vanilla-sci-pi") {
    // m plays no role; keep one epoch length.
    points.erase(std::remove_if(points.begin(), points.end(),
                                [&](const GridPoint& p) {
                                  return p.epoch_length != grid.epoch_lengths.front();
                                }),
                 points.end());
  }
  RunOptions opt = options;
  opt.replicates = grid.replicates;
  opt.rank = grid.rank;
  opt.budget = grid.budget;

  GridSearchResult out;
  out.table.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    out.table[i].solver = solver;
    out.table[i].point = points[i];
    out.table[i].clock = opt.clock;
    out.table[i].runs.resize(static_cast<std::size_t>(opt.replicates));
  }
  const std::size_t reps = static_cast<std::size_t>(opt.replicates);
  parallel_for(
      points.size() * reps,
      [&](std::size_t task) {
        const std::size_t i = task / reps;
        const int r = static_cast<int>(task % reps);
        out.table[i].runs[static_cast<std::size_t>(r)] =
            run_replicate(v, solver, points[i], opt, r);
      },
      opt.threads);
  reconcile_reference(ref, out.table);
  out.best = select_best(out.table);
  return out;
}

std::optional<double> clock_to_reach(const Trace& trace, double target, Clock clock) {
  for (const auto& r : trace.records) {
    if (r.relative_error <= target) return clock_value(r, clock);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Emission

namespace {

const char* kCsvHeader =
    "solver,scheme,batch_prop,epoch_len,step_size,replicate,seed,diverged,time,round,"
    "objective,rel_error";

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace

void write_results_csv(const std::vector<ExperimentResult>& results, std::ostream& out) {
  out << kCsvHeader << '\n';
  for (const auto& res : results) {
    for (const auto& run : res.runs) {
      for (const auto& r : run.trace.records) {
        out << res.solver.label() << ',' << to_string(res.solver.scheme) << ','
            << format_real(res.point.batch_proportion) << ',' << res.point.epoch_length << ','
            << format_real(res.point.step_size) << ',' << run.replicate << ','
            << run.trace.seed << ',' << (run.diverged ? 1 : 0) << ','
            << format_real(clock_value(r, res.clock)) << ',' << r.round << ','
            << format_real(r.objective) << ',' << format_real(r.relative_error) << '\n';
      }
    }
  }
}

std::vector<ExperimentResult> read_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw ParseError("unexpected results CSV header", 1);
  }
  std::vector<ExperimentResult> results;
  std::map<std::string, std::size_t> group;
  std::map<std::pair<std::size_t, int>, std::size_t> run_index;
  std::int64_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 12) throw ParseError("expected 12 fields", lineno);
    const std::string key = f[0] + ',' + f[1] + ',' + f[2] + ',' + f[3] + ',' + f[4];
    auto [it, fresh] = group.emplace(key, results.size());
    if (fresh) {
      ExperimentResult res;
      const auto slash = f[0].find('/');
      res.solver.name = f[0].substr(0, slash);
      res.solver.scheme = scheme_from_string(f[1]);
      if (slash != std::string::npos) {
        const std::string tail = f[0].substr(f[0].rfind('/') + 1);
        if (tail == "row" || tail == "element") res.solver.mode = sampling_mode_from_string(tail);
      }
      res.point.batch_proportion = std::stod(f[2]);
      res.point.epoch_length = std::stoll(f[3]);
      res.point.step_size = std::stod(f[4]);
      res.clock = Clock::work;
      results.push_back(std::move(res));
    }
    ExperimentResult& res = results[it->second];
    const int rep = std::stoi(f[5]);
    auto [rit, new_run] = run_index.emplace(std::make_pair(it->second, rep), res.runs.size());
    if (new_run) {
      ReplicateRun run;
      run.replicate = rep;
      run.trace.solver = f[0];
      run.trace.seed = std::stoull(f[6]);
      run.diverged = f[7] == "1";
      res.runs.push_back(std::move(run));
    }
    TraceRecord r;
    r.seconds = r.work = std::stod(f[8]);
    r.round = std::stoll(f[9]);
    r.objective = std::stod(f[10]);
    r.relative_error = std::stod(f[11]);
    res.runs[rit->second].trace.records.push_back(r);
  }
  for (auto& res : results) aggregate(res);
  return results;
}

namespace {

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json real_array(const std::vector<double>& x) {
  json a = json::array();
  for (double v : x) a.push_back(finite_or_null(v));
  return a;
}

}  // namespace

json summary_json(const std::vector<ExperimentResult>& results, const ReferenceObjective* ref) {
  json j;
  if (ref) {
    j["reference"] = {{"dataset", ref->dataset_id},   {"rank", ref->rank},
                      {"value", ref->value},          {"solver", ref->solver},
                      {"low_confidence", ref->low_confidence},
                      {"invalidations", ref->invalidations}};
  }
  json rows = json::array();
  for (const auto& res : results) {
    json r;
    r["solver"] = res.solver;
    r["point"] = res.point;
    r["clock"] = to_string(res.clock);
    r["replicates"] = res.runs.size();
    r["diverged"] = res.diverged();
    r["mean_final"] = finite_or_null(res.mean_final);
    r["median_final"] = finite_or_null(res.median_final);
    r["finals"] = real_array(res.finals);
    r["quartiles"] = real_array({quantile_of(res.finals, 0.0), quantile_of(res.finals, 0.25),
                                 quantile_of(res.finals, 0.5), quantile_of(res.finals, 0.75),
                                 quantile_of(res.finals, 1.0)});
    r["curve"] = {{"time", real_array(res.curve.time)},
                  {"mean", real_array(res.curve.mean)},
                  {"median", real_array(res.curve.median)}};
    r["warnings"] = res.warnings;
    rows.push_back(std::move(r));
  }
  j["results"] = std::move(rows);
  return j;
}

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string point_label(const ExperimentResult& r) {
  std::string s = r.solver.label();
  if (r.solver.uses_grid()) {
    s += " s/n=" + format_real(r.point.batch_proportion).substr(0, 8) +
         " m=" + std::to_string(r.point.epoch_length) +
         " eta=" + format_real(r.point.step_size).substr(0, 6);
  }
  return s;
}

}  // namespace

void write_svg(const std::vector<ExperimentResult>& results, std::ostream& out,
               const SvgOptions& options) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                  "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  const double W = options.width, H = options.height;
  const double pad = 48.0;
  const double panel = (W - 3 * pad) / 2.0;
  const double plot_h = H - 2 * pad;

  double t_max = 0.0, lo = 0.0, hi = 0.0;
  bool any = false;
  auto take = [&](double e) {
    if (!(e > 0.0) || !std::isfinite(e)) return;
    const double l = std::log10(e);
    if (!any) lo = hi = l;
    lo = std::min(lo, l);
    hi = std::max(hi, l);
    any = true;
  };
  for (const auto& r : results) {
    for (std::size_t i = 0; i < r.curve.time.size(); ++i) {
      if (r.curve.time[i] < options.min_time) continue;
      t_max = std::max(t_max, r.curve.time[i]);
      take(r.curve.mean[i]);
    }
    for (double f : r.finals) take(f);
  }
  if (!any) lo = -1, hi = 0;
  lo = std::floor(lo);
  hi = std::ceil(hi);
  if (hi <= lo) hi = lo + 1;
  if (t_max <= options.min_time) t_max = options.min_time + 1.0;

  auto ypos = [&](double e) {
    const double l = std::clamp(std::log10(std::max(e, 1e-300)), lo, hi);
    return pad + plot_h * (hi - l) / (hi - lo);
  };
  auto xpos = [&](double t) {
    return pad + panel * (t - options.min_time) / (t_max - options.min_time);
  };

  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  const double x2 = 2 * pad + panel;
  for (double x0 : {pad, x2}) {
    out << "<rect x=\"" << x0 << "\" y=\"" << pad << "\" width=\"" << panel << "\" height=\""
        << plot_h << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int d = static_cast<int>(lo); d <= static_cast<int>(hi); ++d) {
      const double y = ypos(std::pow(10.0, d));
      out << "<line x1=\"" << x0 << "\" y1=\"" << y << "\" x2=\"" << x0 + panel << "\" y2=\""
          << y << "\" stroke=\"#ddd\"/>\n";
      out << "<text x=\"" << x0 - 4 << "\" y=\"" << y + 3
          << "\" text-anchor=\"end\">1e" << d << "</text>\n";
    }
  }
  const std::string xlabel = results.empty() || results.front().clock == Clock::wall
                                 ? "seconds"
                                 : "gradient-sample evaluations";
  out << "<text x=\"" << pad + panel / 2 << "\" y=\"" << H - 12
      << "\" text-anchor=\"middle\">" << xlabel << " (max " << format_real(t_max).substr(0, 10)
      << ")</text>\n";
  out << "<text x=\"" << pad + panel / 2 << "\" y=\"" << pad - 8
      << "\" text-anchor=\"middle\">mean relative error</text>\n";
  out << "<text x=\"" << x2 + panel / 2 << "\" y=\"" << pad - 8
      << "\" text-anchor=\"middle\">final relative error</text>\n";

  const double slot = results.empty() ? panel : panel / static_cast<double>(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    const char* color = palette[i % 8];
    std::ostringstream pts;
    for (std::size_t k = 0; k < r.curve.time.size(); ++k) {
      if (r.curve.time[k] < options.min_time) continue;
      pts << xpos(r.curve.time[k]) << ',' << ypos(r.curve.mean[k]) << ' ';
    }
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"" << pts.str()
        << "\"><title>" << xml_escape(point_label(r)) << "</title></polyline>\n";
    out << "<text x=\"" << pad + 6 << "\" y=\"" << pad + 12 + 11 * static_cast<double>(i)
        << "\" fill=\"" << color << "\">" << xml_escape(point_label(r)) << "</text>\n";

    if (r.finals.empty()) continue;
    const double cx = x2 + slot * (static_cast<double>(i) + 0.5);
    const double bw = std::max(2.0, slot * 0.5);
    const double q0 = ypos(quantile_of(r.finals, 0.0)), q1 = ypos(quantile_of(r.finals, 0.25));
    const double q2 = ypos(quantile_of(r.finals, 0.5)), q3 = ypos(quantile_of(r.finals, 0.75));
    const double q4 = ypos(quantile_of(r.finals, 1.0));
    out << "<g stroke=\"" << color << "\"><title>" << xml_escape(point_label(r))
        << "</title>\n";
    out << "<line x1=\"" << cx << "\" y1=\"" << q0 << "\" x2=\"" << cx << "\" y2=\"" << q4
        << "\"/>\n";
    out << "<rect x=\"" << cx - bw / 2 << "\" y=\"" << q3 << "\" width=\"" << bw
        << "\" height=\"" << std::max(0.5, q1 - q3) << "\" fill=\"white\"/>\n";
    out << "<line x1=\"" << cx - bw / 2 << "\" y1=\"" << q2 << "\" x2=\"" << cx + bw / 2
        << "\" y2=\"" << q2 << "\" stroke-width=\"2\"/>\n";
    out << "</g>\n";
  }
  out << "</svg>\n";
}

// ---------------------------------------------------------------------------
// Grid runs

CountMatrix load_source(const DataSource& source, DatasetManifest* manifest) {
  CountMatrix v;
  DatasetManifest m;
  if (source.synthetic) {
    v = gen_poisson(*source.synthetic);
    m = describe(v, "poisson", "synthetic", "generated");
  } else {
    if (source.path.empty()) throw std::invalid_argument("data source needs a path or synthetic spec");
    v = load_counts(source.path, source.format);
    m = describe(v, std::filesystem::path(source.path).stem().string(), source.path,
                 source.format);
  }
  if (source.min_sum > 0.0) {
    Preprocessed p = preprocess_min_sum(v, source.min_sum);
    v = std::move(p.matrix);
    m.rows = v.rows();
    m.cols = v.cols();
    m.nnz = v.nnz();
    m.preprocessing = "min_sum " + format_real(source.min_sum);
  }
  if (manifest) *manifest = m;
  return v;
}

GridOutputs run_grid(const GridConfig& config, int threads) {
  if (config.solvers.empty()) throw std::invalid_argument("no solvers configured");
  config.grid.validate();
  GridOutputs out;
  const CountMatrix v = load_source(config.data, &out.manifest);
  out.reference = compute_reference(v, config.grid.rank, config.reference, config.cache_dir,
                                    threads);
  RunOptions opt;
  opt.master_seed = config.seed;
  opt.clock = config.clock;
  opt.exact_tolerance = config.exact_tolerance;
  opt.exact_inner_cap = config.exact_inner_cap;
  opt.threads = threads;
  for (const auto& solver : config.solvers) {
    GridSearchResult g = grid_search(v, solver, config.grid, opt, out.reference);
    for (auto& r : g.table) out.table.push_back(std::move(r));
  }
  // A later solver may have lowered f*; rescore everything against the final value.
  reconcile_reference(out.reference, out.table);
  if (config.cache_dir && out.reference.invalidations > 0) {
    save_reference(out.reference, reference_cache_path(*config.cache_dir,
                                                       out.reference.dataset_id,
                                                       out.reference.rank));
  }
  std::size_t start = 0;
  for (const auto& solver : config.solvers) {
    std::vector<ExperimentResult> slice;
    std::size_t end = start;
    while (end < out.table.size() && out.table[end].solver.label() == solver.label()) ++end;
    slice.assign(out.table.begin() + static_cast<std::ptrdiff_t>(start),
                 out.table.begin() + static_cast<std::ptrdiff_t>(end));
    out.best.push_back(start + select_best(slice));
    start = end;
  }
  return out;
}

void write_grid_outputs(const GridOutputs& outputs, const std::string& prefix) {
  const auto parent = std::filesystem::path(prefix).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  {
    std::ofstream csv(prefix + ".csv");
    if (!csv) throw std::runtime_error("cannot write " + prefix + ".csv");
    write_results_csv(outputs.table, csv);
  }
  json summary = summary_json(outputs.table, &outputs.reference);
  summary["dataset"] = outputs.manifest;
  json best = json::array();
  std::vector<ExperimentResult> best_results;
  for (std::size_t b : outputs.best) {
    best.push_back({{"solver", outputs.table[b].solver.label()},
                    {"point", outputs.table[b].point},
                    {"mean_final", outputs.table[b].mean_final}});
    best_results.push_back(outputs.table[b]);
  }
  summary["best"] = std::move(best);
  {
    std::ofstream js(prefix + ".json");
    if (!js) throw std::runtime_error("cannot write " + prefix + ".json");
    js << summary.dump(2) << '\n';
  }
  std::ofstream svg(prefix + ".svg");
  if (!svg) throw std::runtime_error("cannot write " + prefix + ".svg");
  write_svg(best_results, svg);
}

// ---------------------------------------------------------------------------
// Checkpoint

void save_checkpoint(const std::string& path, const FactorPair& model, const json& config) {
  json j;
  j["format"] = "sscipi-model";
  j["version"] = 1;
  j["N"] = model.W.rows();
  j["M"] = model.H.cols();
  j["K"] = model.rank();
  std::vector<double> w, h;
  w.reserve(static_cast<std::size_t>(model.W.size()));
  h.reserve(static_cast<std::size_t>(model.H.size()));
  for (Index i = 0; i < model.W.rows(); ++i) {
    for (Index k = 0; k < model.W.cols(); ++k) w.push_back(model.W(i, k));
  }
  for (Index k = 0; k < model.H.rows(); ++k) {
    for (Index jj = 0; jj < model.H.cols(); ++jj) h.push_back(model.H(k, jj));
  }
  j["W"] = std::move(w);
  j["H"] = std::move(h);
  j["config"] = config;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump() << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  const json j = json::parse(in);
  if (j.value("format", "") != "sscipi-model") throw ParseError("not a model checkpoint", 0);
  const Index n = j.at("N").get<Index>(), m = j.at("M").get<Index>(), k = j.at("K").get<Index>();
  const auto w = j.at("W").get<std::vector<double>>();
  const auto h = j.at("H").get<std::vector<double>>();
  if (static_cast<Index>(w.size()) != n * k || static_cast<Index>(h.size()) != k * m) {
    throw ShapeError("checkpoint factor sizes do not match N, M, K");
  }
  Checkpoint c;
  c.model.W.resize(n, k);
  c.model.H.resize(k, m);
  for (Index i = 0; i < n; ++i) {
    for (Index kk = 0; kk < k; ++kk) c.model.W(i, kk) = w[static_cast<std::size_t>(i * k + kk)];
  }
  for (Index kk = 0; kk < k; ++kk) {
    for (Index jj = 0; jj < m; ++jj) c.model.H(kk, jj) = h[static_cast<std::size_t>(kk * m + jj)];
  }
  c.config = j.value("config", json::object());
  return c;
}

// ---------------------------------------------------------------------------
// JSON

void to_json(json& j, const GridPoint& p) {
  j = {{"batch_proportion", p.batch_proportion},
       {"epoch_length", p.epoch_length},
       {"step_size", p.step_size}};
}

void from_json(const json& j, GridPoint& p) {
  p.batch_proportion = j.value("batch_proportion", p.batch_proportion);
  p.epoch_length = j.value("epoch_length", p.epoch_length);
  p.step_size = j.value("step_size", p.step_size);
}

void to_json(json& j, const Budget& b) {
  j = {{"max_rounds", b.max_rounds}};
  if (b.max_seconds) j["max_seconds"] = *b.max_seconds;
  if (b.max_work) j["max_work"] = *b.max_work;
}

void from_json(const json& j, Budget& b) {
  b.max_rounds = j.value("max_rounds", b.max_rounds);
  if (j.contains("max_seconds")) b.max_seconds = j.at("max_seconds").get<double>();
  if (j.contains("max_work")) b.max_work = j.at("max_work").get<double>();
}

void to_json(json& j, const ExperimentGrid& g) {
  j = {{"batch_proportions", g.batch_proportions},
       {"epoch_lengths", g.epoch_lengths},
       {"step_sizes", g.step_sizes},
       {"replicates", g.replicates},
       {"rank", g.rank},
       {"budget", g.budget}};
}

void from_json(const json& j, ExperimentGrid& g) {
  g.batch_proportions = j.value("batch_proportions", g.batch_proportions);
  g.epoch_lengths = j.value("epoch_lengths", g.epoch_lengths);
  g.step_sizes = j.value("step_sizes", g.step_sizes);
  g.replicates = j.value("replicates", g.replicates);
  g.rank = j.value("rank", g.rank);
  if (j.contains("budget")) g.budget = j.at("budget").get<Budget>();
}

void to_json(json& j, const SolverSpec& s) {
  j = {{"name", s.name}, {"scheme", to_string(s.scheme)}, {"clamp", s.clamp},
       {"replacement", s.replacement}};
  if (s.mode) j["mode"] = to_string(*s.mode);
}

void from_json(const json& j, SolverSpec& s) {
  if (j.is_string()) {
    s.name = j.get<std::string>();
  } else {
    s.name = j.value("name", s.name);
    if (j.contains("scheme")) s.scheme = scheme_from_string(j.at("scheme").get<std::string>());
    if (j.contains("mode")) s.mode = sampling_mode_from_string(j.at("mode").get<std::string>());
    s.clamp = j.value("clamp", s.clamp);
    s.replacement = j.value("replacement", s.replacement);
  }
  if (std::find(solver_names().begin(), solver_names().end(), s.name) == solver_names().end()) {
    throw std::invalid_argument("unknown solver '" + s.name + "'");
  }
}

void to_json(json& j, const SyntheticSpec& s) {
  j = {{"rows", s.rows}, {"cols", s.cols}, {"sparsity", s.sparsity}, {"seed", s.seed}};
}

void from_json(const json& j, SyntheticSpec& s) {
  s.rows = j.value("rows", s.rows);
  s.cols = j.value("cols", s.cols);
  s.sparsity = j.value("sparsity", s.sparsity);
  s.seed = j.value("seed", s.seed);
}

void to_json(json& j, const ReferenceBudget& b) {
  j = {{"mu_rounds", b.mu_rounds},
       {"exact_rounds", b.exact_rounds},
       {"exact_inner_cap", b.exact_inner_cap},
       {"seeds", b.seeds}};
}

void from_json(const json& j, ReferenceBudget& b) {
  b.mu_rounds = j.value("mu_rounds", b.mu_rounds);
  b.exact_rounds = j.value("exact_rounds", b.exact_rounds);
  b.exact_inner_cap = j.value("exact_inner_cap", b.exact_inner_cap);
  b.seeds = j.value("seeds", b.seeds);
}

void to_json(json& j, const DataSource& d) {
  j = json::object();
  if (d.synthetic) {
    j["synthetic"] = *d.synthetic;
  } else {
    j["path"] = d.path;
    j["format"] = d.format;
  }
  j["min_sum"] = d.min_sum;
}

void from_json(const json& j, DataSource& d) {
  if (j.contains("synthetic")) d.synthetic = j.at("synthetic").get<SyntheticSpec>();
  d.path = j.value("path", d.path);
  d.format = j.value("format", d.format);
  d.min_sum = j.value("min_sum", d.min_sum);
}

void to_json(json& j, const GridConfig& c) {
  j = {{"data", c.data},
       {"solvers", c.solvers},
       {"grid", c.grid},
       {"seed", c.seed},
       {"clock", to_string(c.clock)},
       {"reference", c.reference},
       {"exact_tolerance", c.exact_tolerance},
       {"exact_inner_cap", c.exact_inner_cap}};
  if (c.cache_dir) j["cache_dir"] = *c.cache_dir;
}

void from_json(const json& j, GridConfig& c) {
  if (j.contains("data")) c.data = j.at("data").get<DataSource>();
  if (j.contains("solvers")) c.solvers = j.at("solvers").get<std::vector<SolverSpec>>();
  if (j.contains("grid")) c.grid = j.at("grid").get<ExperimentGrid>();
  c.seed = j.value("seed", c.seed);
  if (j.contains("clock")) c.clock = clock_from_string(j.at("clock").get<std::string>());
  if (j.contains("reference")) c.reference = j.at("reference").get<ReferenceBudget>();
  if (j.contains("cache_dir")) c.cache_dir = j.at("cache_dir").get<std::string>();
  c.exact_tolerance = j.value("exact_tolerance", c.exact_tolerance);
  c.exact_inner_cap = j.value("exact_inner_cap", c.exact_inner_cap);
}

void to_json(json& j, const DatasetManifest& m) {
  j = {{"name", m.name},   {"source", m.source}, {"format", m.format},
       {"rows", m.rows},   {"cols", m.cols},     {"nnz", m.nnz},
       {"preprocessing", m.preprocessing}};
}

}  // namespace sscipi
