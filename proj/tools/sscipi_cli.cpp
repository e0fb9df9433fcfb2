#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sscipi/acceptance.hpp"
#include "sscipi/bench.hpp"
#include "sscipi/scipi.hpp"
#include "sscipi/verify.hpp"

using namespace sscipi;

namespace {

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return json::parse(in);
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

void write_trace_csv(const Trace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "round,seconds,work,objective\n";
  for (const auto& r : trace.records) {
    out << r.round << ',' << format_real(r.seconds) << ',' << format_real(r.work) << ','
        << format_real(r.objective) << '\n';
  }
}

// generate ------------------------------------------------------------------

struct GenerateArgs {
  SyntheticSpec spec;
  std::string out;
  std::string format = "uci";
};

int run_generate(const GenerateArgs& a) {
  a.spec.validate();
  const CountMatrix v = gen_poisson(a.spec);
  std::ofstream out(a.out);
  if (!out) throw std::runtime_error("cannot write " + a.out);
  if (a.format == "uci") {
    write_uci_bow(v, out);
  } else if (a.format == "mm") {
    write_matrix_market(v, out);
  } else if (a.format == "csv") {
    write_csv(v.to_dense(), out);
  } else {
    throw std::invalid_argument("unknown format " + a.format);
  }
  std::printf("%lld x %lld, %lld nonzeros (fraction %.4f) -> %s\n",
              static_cast<long long>(v.rows()), static_cast<long long>(v.cols()),
              static_cast<long long>(v.nnz()), v.density(), a.out.c_str());
  return 0;
}

// factorize -----------------------------------------------------------------

struct FactorizeArgs {
  DataSource data;
  Index rank = 20;
  SolverSpec solver;
  GridPoint point{0.3, 10, 0.1};
  Budget budget;
  std::uint64_t seed = 0;
  double exact_tolerance = 1e-10;
  Index exact_inner_cap = 10000;
  std::string out_prefix = "model";
  std::optional<std::string> diagnose;
};

void to_json(json& j, const FactorizeArgs& a) {
  j = json{{"data", a.data},         {"rank", a.rank},
           {"solver", a.solver},     {"point", a.point},
           {"budget", a.budget},     {"seed", a.seed},
           {"exact_tolerance", a.exact_tolerance},
           {"exact_inner_cap", a.exact_inner_cap}};
}

void apply_config(const json& j, FactorizeArgs& a) {
  if (j.contains("data")) j.at("data").get_to(a.data);
  if (j.contains("rank")) j.at("rank").get_to(a.rank);
  if (j.contains("solver")) j.at("solver").get_to(a.solver);
  if (j.contains("point")) j.at("point").get_to(a.point);
  if (j.contains("budget")) j.at("budget").get_to(a.budget);
  if (j.contains("seed")) j.at("seed").get_to(a.seed);
  if (j.contains("exact_tolerance")) j.at("exact_tolerance").get_to(a.exact_tolerance);
  if (j.contains("exact_inner_cap")) j.at("exact_inner_cap").get_to(a.exact_inner_cap);
}

int run_factorize(const FactorizeArgs& a) {
  DatasetManifest manifest;
  const CountMatrix v = load_source(a.data, &manifest);
  FactorPair model = init_model(v, a.rank, a.seed);
  auto hs = make_updater(a.solver, a.point, v, a.seed);
  auto ws = make_updater(a.solver, a.point, v, a.seed);
  AlternateOptions opt;
  opt.scheme = a.solver.scheme;
  opt.budget = a.budget;
  opt.exact_tolerance = a.exact_tolerance;
  opt.exact_inner_cap = a.exact_inner_cap;
  opt.solver_name = a.solver.label();
  opt.seed = a.seed;
  const AlternateResult res = alternate(v, std::move(model), *hs, *ws, opt);

  json config = a;
  config["dataset"] = manifest;
  save_checkpoint(a.out_prefix + ".model.json", res.model, config);
  write_trace_csv(res.trace, a.out_prefix + ".trace.csv");
  const auto& last = res.trace.records.back();
  std::printf("%s: %lld rounds, objective %.10g, %.3g s, work %.4g\n", opt.solver_name.c_str(),
              static_cast<long long>(last.round), last.objective, last.seconds, last.work);
  if (a.diagnose) {
    json d{{"solver", opt.solver_name},
           {"rounds", last.round},
           {"initial_objective", res.trace.records.front().objective},
           {"final_objective", last.objective},
           {"seconds", last.seconds},
           {"work", last.work},
           {"restarts", res.restarts},
           {"clamped", res.clamped},
           {"inner_iterations", res.inner_iterations},
           {"diverged", !std::isfinite(last.objective)}};
    write_json(*a.diagnose, d);
  }
  return 0;
}

// subproblem ----------------------------------------------------------------

struct SubproblemArgs {
  DataSource data;
  std::optional<std::string> checkpoint;
  Index rank = 5;
  std::uint64_t seed = 0;
  Index column = 0;
  std::string mode = "row";
  double step_size = 1.0;
  double batch_prop = 1.0;
  Index epoch_length = 1;
  Index max_epochs = 10000;
  double tolerance = 1e-15;
  std::optional<std::string> out;
  std::optional<std::string> diagnose;
};

int run_subproblem(const SubproblemArgs& a) {
  const CountMatrix v = load_source(a.data);
  const DMatrix w = a.checkpoint ? load_checkpoint(*a.checkpoint).model.W
                                 : init_model(v, a.rank, a.seed).W;
  if (w.rows() != v.rows()) throw ShapeError("W rows do not match the data");
  if (a.column < 0 || a.column >= v.cols()) throw std::out_of_range("column out of range");
  if (v.col_nnz(a.column) == 0) throw ZeroSumError("column has no nonzeros", a.column);

  const SubproblemBundle bundle = build_subproblems(v, w);
  const auto problem =
      column_problem(bundle, v, a.column, sampling_mode_from_string(a.mode));
  SolverConfig cfg;
  cfg.step_size = a.step_size;
  cfg.batch_size = batch_size_for(a.batch_prop, problem.sample_count());
  cfg.epoch_length = a.epoch_length;
  cfg.max_epochs = a.max_epochs;
  cfg.objective_tolerance = a.tolerance;
  cfg.seed = a.seed;
  cfg.nonnegative_gradient = true;

  std::vector<DVector> history{bundle.Y.col(a.column)};
  const auto outcome = solve<double>(
      problem, cfg, bundle.Y.col(a.column), RngStream(a.seed),
      [&](Index, Index t, const DVector& x) {
        if (t + 1 == cfg.epoch_length) history.push_back(x / x.norm());
      });

  const DVector x = outcome.x.cwiseAbs2();
  const double scale = bundle.v_col_sums[a.column];
  DVector h(x.size());
  for (Index k = 0; k < x.size(); ++k) h[k] = scale * x[k] / bundle.w_col_sums[k];

  json result{{"column", a.column},
              {"x", std::vector<double>(x.data(), x.data() + x.size())},
              {"h", std::vector<double>(h.data(), h.data() + h.size())},
              {"objective", problem.value(outcome.x)},
              {"epochs", outcome.epochs_used},
              {"restarts", outcome.restarts},
              {"termination", to_string(outcome.termination)}};
  if (a.out) {
    write_json(*a.out, result);
  } else {
    std::cout << result.dump(2) << "\n";
  }

  if (a.diagnose) {
    const auto diag = spectral_diagnostics(problem, outcome.x);
    json d{{"multiplier", diag.multiplier},
           {"tangent_radius", diag.tangent_radius},
           {"predicted_rate", diag.predicted_rate},
           {"local_maximum", diag.local_maximum},
           {"stationary", diag.stationary},
           {"eigenvector_residual", diag.eigenvector_residual},
           {"stationarity_residual", diag.stationarity_residual},
           {"hessian_norm", diag.hessian_norm},
           {"hessian_eigenvalues",
            std::vector<double>(diag.hessian_eigenvalues.data(),
                                diag.hessian_eigenvalues.data() + diag.hessian_eigenvalues.size())}};
    try {
      const RateFit fit = fit_rate<double>(history, outcome.x);
      d["observed_rate"] = fit.ratio;
      d["rate_window"] = fit.window;
    } catch (const std::invalid_argument& e) {
      d["observed_rate"] = nullptr;
      d["rate_note"] = e.what();
    }
    if (!diag.stationary) {
      std::fprintf(stderr, "warning: solution is not stationary to %g\n", kStationarityWarning);
    }
    write_json(*a.diagnose, d);
  }
  return 0;
}

// grid ----------------------------------------------------------------------

struct GridArgs {
  std::string grid_file;
  std::optional<int> replicates;
  std::string out_prefix = "grid";
  int threads = 0;
};

int run_grid_command(const GridArgs& a) {
  GridConfig cfg = read_json(a.grid_file).get<GridConfig>();
  if (a.replicates) cfg.grid.replicates = *a.replicates;
  const GridOutputs out = run_grid(cfg, a.threads);
  write_grid_outputs(out, a.out_prefix);
  for (std::size_t i = 0; i < out.best.size(); ++i) {
    const auto& r = out.table[out.best[i]];
    std::printf("%-22s s/n=%-8g m=%-6lld eta=%-6g mean final rel. error %.4g (%zu/%zu diverged)\n",
                r.solver.label().c_str(), r.point.batch_proportion,
                static_cast<long long>(r.point.epoch_length), r.point.step_size, r.mean_final,
                r.diverged(), r.runs.size());
  }
  std::printf("f* = %s (%s)%s\n", format_real(out.reference.value).c_str(),
              out.reference.solver.c_str(),
              out.reference.low_confidence ? " low confidence" : "");
  return 0;
}

// repro ---------------------------------------------------------------------

int run_repro(const std::vector<int>& ids, const AcceptanceOptions& options) {
  std::vector<int> which = ids;
  if (which.empty()) {
    for (int id = 1; id <= kCriterionCount; ++id) which.push_back(id);
  }
  int failed = 0;
  for (int id : which) {
    const auto r = run_criterion(id, options);
    std::printf("%s\n", format_result(r).c_str());
    std::fflush(stdout);
    failed += r.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}

void add_data_options(CLI::App* cmd, DataSource& data) {
  cmd->add_option("--data", data.path, "count matrix file");
  cmd->add_option("--format", data.format, "uci, mm or csv")
      ->check(CLI::IsMember({"uci", "mm", "csv"}));
  cmd->add_option("--min-sum", data.min_sum, "drop rows, then columns, summing below this");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic scale-invariant power iteration for KL-NMF"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (default: SSCIPI_THREADS or all cores)");

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "synthetic Poisson count matrix");
  generate->add_option("--rows", gen.spec.rows)->required();
  generate->add_option("--cols", gen.spec.cols)->required();
  generate->add_option("--sparsity", gen.spec.sparsity, "expected nonzero fraction")->required();
  generate->add_option("--seed", gen.spec.seed);
  generate->add_option("--out", gen.out)->required();
  generate->add_option("--out-format", gen.format, "uci, mm or csv")
      ->check(CLI::IsMember({"uci", "mm", "csv"}));

  FactorizeArgs fac;
  std::string fac_config;
  std::string fac_solver;
  std::string fac_scheme;
  std::optional<double> budget_sec;
  std::optional<double> max_work;
  std::optional<std::int64_t> max_rounds;
  auto* factorize = app.add_subcommand("factorize", "KL-NMF of a count matrix");
  factorize->add_option("--config", fac_config, "JSON config; flags override it");
  add_data_options(factorize, fac.data);
  factorize->add_option("--rank", fac.rank);
  factorize->add_option("--solver", fac_solver)->check(CLI::IsMember(solver_names()));
  factorize->add_option("--scheme", fac_scheme)->check(CLI::IsMember({"one_step", "exact"}));
  factorize->add_option("--eta", fac.point.step_size);
  factorize->add_option("--batch-prop", fac.point.batch_proportion);
  factorize->add_option("--epoch-len", fac.point.epoch_length);
  factorize->add_option("--budget-sec", budget_sec);
  factorize->add_option("--max-work", max_work);
  factorize->add_option("--rounds", max_rounds);
  factorize->add_option("--seed", fac.seed);
  factorize->add_option("--out-prefix", fac.out_prefix);
  factorize->add_option("--diagnose", fac.diagnose, "write diagnostics JSON here");

  SubproblemArgs sub;
  auto* subproblem = app.add_subcommand("subproblem", "exact solve of one H column given W");
  add_data_options(subproblem, sub.data);
  subproblem->add_option("--checkpoint", sub.checkpoint, "take W from a model file");
  subproblem->add_option("--rank", sub.rank, "rank of the initial W without a checkpoint");
  subproblem->add_option("--seed", sub.seed);
  subproblem->add_option("--column", sub.column);
  subproblem->add_option("--mode", sub.mode)->check(CLI::IsMember({"row", "element"}));
  subproblem->add_option("--eta", sub.step_size);
  subproblem->add_option("--batch-prop", sub.batch_prop);
  subproblem->add_option("--epoch-len", sub.epoch_length);
  subproblem->add_option("--max-epochs", sub.max_epochs);
  subproblem->add_option("--tol", sub.tolerance);
  subproblem->add_option("--out", sub.out);
  subproblem->add_option("--diagnose", sub.diagnose, "write diagnostics JSON here");

  GridArgs grid;
  auto* grid_cmd = app.add_subcommand("grid", "grid search with replicates");
  grid_cmd->add_option("--grid-file", grid.grid_file)->required()->check(CLI::ExistingFile);
  grid_cmd->add_option("--replicates", grid.replicates);
  grid_cmd->add_option("--out-prefix", grid.out_prefix);

  std::vector<int> repro_ids;
  AcceptanceOptions acc;
  auto* repro = app.add_subcommand("repro", "scaled-down acceptance suite");
  repro->add_option("criteria", repro_ids, "criterion ids (default: all)");
  repro->add_option("--work-dir", acc.work_dir);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*generate) return run_generate(gen);
    if (*factorize) {
      if (!fac_config.empty()) {
        // Flags given on the command line win over the file.
        FactorizeArgs from_file = fac;
        apply_config(read_json(fac_config), from_file);
        auto given = [&](const char* flag) { return factorize->count(flag) > 0; };
        if (given("--data")) from_file.data.path = fac.data.path;
        if (given("--format")) from_file.data.format = fac.data.format;
        if (given("--min-sum")) from_file.data.min_sum = fac.data.min_sum;
        if (given("--rank")) from_file.rank = fac.rank;
        if (given("--eta")) from_file.point.step_size = fac.point.step_size;
        if (given("--batch-prop")) from_file.point.batch_proportion = fac.point.batch_proportion;
        if (given("--epoch-len")) from_file.point.epoch_length = fac.point.epoch_length;
        if (given("--seed")) from_file.seed = fac.seed;
        if (given("--out-prefix")) from_file.out_prefix = fac.out_prefix;
        from_file.diagnose = fac.diagnose;
        fac = from_file;
      }
      if (!fac_solver.empty()) fac.solver.name = fac_solver;
      if (!fac_scheme.empty()) fac.solver.scheme = scheme_from_string(fac_scheme);
      if (budget_sec) fac.budget.max_seconds = *budget_sec;
      if (max_work) fac.budget.max_work = *max_work;
      if (max_rounds) fac.budget.max_rounds = *max_rounds;
      if (fac.data.path.empty() && !fac.data.synthetic) throw std::invalid_argument("--data is required");
      return run_factorize(fac);
    }
    if (*subproblem) {
      if (sub.data.path.empty()) throw std::invalid_argument("--data is required");
      return run_subproblem(sub);
    }
    if (*grid_cmd) {
      grid.threads = threads;
      return run_grid_command(grid);
    }
    if (*repro) {
      acc.threads = threads;
      return run_repro(repro_ids, acc);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
