#include "sscipi/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "sscipi/bench.hpp"
#include "sscipi/problems.hpp"
#include "sscipi/scipi.hpp"
#include "sscipi/verify.hpp"

namespace sscipi {

namespace {

using Clock_ = std::chrono::steady_clock;

CriterionResult titled(int id, std::string title) {
  CriterionResult r;
  r.id = id;
  r.title = std::move(title);
  return r;
}

SolverSpec spec(std::string name) {
  SolverSpec s;
  s.name = std::move(name);
  return s;
}

std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

DVector random_vector(RngStream& rng, Index n, double lo = -1.0, double hi = 1.0) {
  DVector v(n);
  for (Index i = 0; i < n; ++i) v[i] = lo + (hi - lo) * rng.uniform();
  return v;
}

DMatrix random_matrix(RngStream& rng, Index r, Index c, double lo = 0.0, double hi = 1.0) {
  DMatrix m(r, c);
  for (Index j = 0; j < c; ++j) {
    for (Index i = 0; i < r; ++i) m(i, j) = lo + (hi - lo) * rng.uniform();
  }
  return m;
}

DMatrix column_stochastic(DMatrix m) {
  for (Index k = 0; k < m.cols(); ++k) m.col(k) /= m.col(k).sum();
  return m;
}

/// Interior mixture toy with known optimum: v = total * L x*.
struct MixtureToy {
  MixtureProblem<double> problem;
  DVector x_star;  // on the simplex
};

MixtureToy mixture_toy(RngStream& rng, Index n, Index d, SamplingMode mode) {
  DMatrix l = column_stochastic(random_matrix(rng, n, d, 0.05, 1.0));
  DVector x = random_vector(rng, d, 0.2, 1.0);
  x /= x.sum();
  DVector v = 50.0 * (l * x);
  return {MixtureProblem<double>(l, v, mode), x};
}

CountMatrix random_counts(RngStream& rng, Index n, Index m, int max_count) {
  std::vector<Eigen::Triplet<double>> t;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) {
      const auto c = rng.uniform_index(static_cast<std::uint64_t>(max_count) + 1);
      if (c > 0) t.emplace_back(static_cast<int>(i), static_cast<int>(j), static_cast<double>(c));
    }
  }
  return CountMatrix(n, m, t);
}

std::vector<DVector> power_history(const DVector& diag, const DVector& x0, int steps) {
  std::vector<DVector> h{x0 / x0.norm()};
  for (int t = 0; t < steps; ++t) {
    DVector next = diag.cwiseProduct(h.back());
    h.push_back(next / next.norm());
  }
  return h;
}

// ---------------------------------------------------------------------------

struct PcaRun {
  std::vector<DVector> iterates;  // normalized, x_0 .. x_100
  double seconds = 0.0;
};

PcaRun pca_sscipi_run() {
  const DVector diag = (DVector(4) << 2.0, 1.0, 0.5, 0.1).finished();
  const auto problem = QuadraticProblem<double>::from_diagonal(diag);
  SolverConfig cfg;
  cfg.step_size = 1.0;
  cfg.batch_size = problem.sample_count();
  cfg.epoch_length = 100;
  cfg.max_epochs = 1;
  const DVector x0 = DVector::Constant(4, 0.5);
  PcaRun run;
  run.iterates.push_back(x0);
  const auto start = Clock_::now();
  solve<double>(problem, cfg, x0, RngStream(1),
                [&](Index, Index, const DVector& x) { run.iterates.push_back(x / x.norm()); });
  run.seconds = std::chrono::duration<double>(Clock_::now() - start).count();
  return run;
}

CriterionResult criterion_1() {
  CriterionResult r = titled(1, "power-iteration reduction");
  const PcaRun run = pca_sscipi_run();
  const auto reference =
      power_history((DVector(4) << 2.0, 1.0, 0.5, 0.1).finished(), DVector::Constant(4, 0.5), 100);
  double worst = 0.0;
  for (std::size_t t = 0; t < reference.size() && t < run.iterates.size(); ++t) {
    worst = std::max(worst, (run.iterates[t] - reference[t]).cwiseAbs().maxCoeff());
  }
  const bool steps_ok = run.iterates.size() == 101;
  r.pass = steps_ok && worst <= 1e-12 && run.seconds < 1.0;
  r.detail = std::to_string(run.iterates.size() - 1) + " steps, max deviation " + sci(worst) +
             ", solve " + sci(run.seconds) + " s";
  return r;
}

CriterionResult criterion_2() {
  CriterionResult r = titled(2, "rate prediction");
  const auto start = Clock_::now();
  const PcaRun run = pca_sscipi_run();
  const DVector e1 = DVector::Unit(4, 0);
  const RateFit fit = fit_rate<double>(run.iterates, e1);
  const double secs = std::chrono::duration<double>(Clock_::now() - start).count();
  r.pass = std::abs(fit.ratio - 0.25) <= 0.02 && secs < 1.0;
  r.detail = "fitted ratio " + sci(fit.ratio) + " over " + std::to_string(fit.window) +
             " gaps (target 0.25 +- 0.02)";
  return r;
}

CriterionResult criterion_3() {
  CriterionResult r = titled(3, "subproblem oracle");
  // V = [[3],[1]], W = I: L = I and the H subproblem is the mixture toy.
  const std::vector<Eigen::Triplet<double>> t{{0, 0, 3.0}, {1, 0, 1.0}};
  const CountMatrix v(2, 1, t);
  const DMatrix w = DMatrix::Identity(2, 2);
  DMatrix h = DMatrix::Constant(2, 1, 2.0);
  FullScipiUpdater updater;
  const auto start = Clock_::now();
  auto objective = [&] { return kl_divergence(v, w, h); };
  double previous = objective();
  Index iterations = 0;
  bool converged = false;
  for (; iterations < 10000; ++iterations) {
    UpdateContext ctx;
    ctx.inner = iterations;
    ctx.continuing = iterations > 0;
    updater.update_H(v, w, h, ctx);
    const double value = objective();
    if (std::abs(previous - value) < 1e-10 * std::max(1.0, std::abs(value))) {
      converged = true;
      ++iterations;
      break;
    }
    previous = value;
  }
  const double secs = std::chrono::duration<double>(Clock_::now() - start).count();
  const DVector x = h.col(0) / h.col(0).sum();
  const double err = std::max(std::abs(x[0] - 0.75), std::abs(x[1] - 0.25));
  r.pass = err <= 1e-8 && secs < 1.0;

  // Damped full-batch run of the same problem, for contrast.
  const MixtureProblem<double> toy(DMatrix::Identity(2, 2), (DVector(2) << 3.0, 1.0).finished(),
                                   SamplingMode::row);
  SolverConfig cfg;
  cfg.step_size = 0.5;
  cfg.batch_size = 2;
  cfg.max_epochs = 200;
  const auto damped = solve<double>(toy, cfg, DVector::Constant(2, std::sqrt(0.5)));
  const double damped_err = std::abs(damped.x[0] * damped.x[0] - 0.75);

  r.detail = std::string(converged ? "stopped" : "no convergence") + " after " +
             std::to_string(iterations) + " iterations at X=(" + sci(x[0]) + "," + sci(x[1]) +
             "), error " + sci(err) + "; eta=1 maps X to v^2/X (period 2); eta=0.5 full batch " +
             "reaches error " + sci(damped_err);
  return r;
}

CriterionResult criterion_4() {
  CriterionResult r = titled(4, "SVRG unbiasedness");
  RngStream rng(404);
  const DMatrix rows = random_matrix(rng, 4, 3, -1.0, 1.0);
  const auto quad = QuadraticProblem<double>::from_rows(rows);
  const MixtureProblem<double> mix(column_stochastic(random_matrix(rng, 4, 3, 0.1, 1.0)),
                                   random_vector(rng, 4, 1.0, 5.0), SamplingMode::row);
  std::vector<std::vector<Index>> batches;
  for (Index a = 0; a < 4; ++a) {
    for (Index b = a + 1; b < 4; ++b) batches.push_back({a, b});
  }
  double worst = 0.0;
  auto check = [&](const ScaleInvariantProblem<double>& problem) {
    for (int trial = 0; trial < 5; ++trial) {
      DVector x0 = random_vector(rng, 3, 0.1, 1.0).normalized();
      DVector xt = (x0 + 0.5 * random_vector(rng, 3)).cwiseAbs();
      const DVector g0 = problem.grad_full(x0);
      DVector mean = DVector::Zero(3);
      for (const auto& s : batches) {
        mean += *svrg_gradient<double>(problem, xt, x0, g0, s, problem.degree());
      }
      mean /= static_cast<double>(batches.size());
      const DVector full = problem.grad_full(xt);
      worst = std::max(worst, (mean - full).cwiseAbs().maxCoeff() / std::max(1.0, full.norm()));
    }
  };
  check(quad);
  check(mix);
  r.pass = worst <= 1e-12;
  r.detail = "6 batches of size 2, 5 iterate/snapshot pairs on p=2 and p=0 toys, max error " +
             sci(worst);
  return r;
}

CriterionResult criterion_5() {
  CriterionResult r = titled(5, "scale equivariance");
  RngStream rng(505);
  const Index d = 4, n = 6;
  std::vector<DMatrix> quad_terms, norm_terms;
  for (Index l = 0; l < n; ++l) {
    const DVector a = random_vector(rng, d);
    quad_terms.push_back(a * a.transpose());
    norm_terms.push_back(random_matrix(rng, 3, d, -1.0, 1.0));
  }
  const QuadraticProblem<double> quad(quad_terms);
  const NormSumProblem<double> norm(norm_terms);
  const MixtureProblem<double> mix(column_stochastic(random_matrix(rng, n, d, 0.1, 1.0)),
                                   random_vector(rng, n, 1.0, 5.0), SamplingMode::row);
  const ScaleInvariantProblem<double>* problems[] = {&mix, &norm, &quad};
  std::string per_p;
  bool ok = true;
  for (const auto* problem : problems) {
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const DVector x0 = random_vector(rng, d).normalized();
      DVector xt = x0 + 0.7 * random_vector(rng, d);
      if (xt.dot(x0) <= 0.0) xt = -xt;
      const double c = std::exp(std::log(1e-3) + (std::log(1e3) - std::log(1e-3)) * rng.uniform());
      const double eta = 0.05 + 0.95 * rng.uniform();
      const auto batch = sample_rows(n, 2, rng, false);
      const DVector g0 = problem->grad_full(x0);
      const double p = problem->degree();
      const auto g1 = svrg_gradient<double>(*problem, xt, x0, g0, batch, p);
      const DVector cx = c * xt;
      const auto g2 = svrg_gradient<double>(*problem, cx, x0, g0, batch, p);
      if (!g1 || !g2) {
        worst = std::max(worst, 1.0);
        continue;
      }
      const DVector base = c * inner_step<double>(xt, *g1, eta, p);
      const DVector scaled = inner_step<double>(cx, *g2, eta, p);
      worst = std::max(worst, (scaled - base).norm() / base.norm());
    }
    ok = ok && worst <= 1e-10;
    per_p += (per_p.empty() ? "" : ", ") + std::string("p=") +
             std::to_string(static_cast<int>(problem->degree())) + ": " + sci(worst);
  }
  r.pass = ok;
  r.detail = "100 trials each, max relative error " + per_p;
  return r;
}

CriterionResult criterion_6() {
  CriterionResult r = titled(6, "MU monotonicity and fixed point");
  double worst_increase = 0.0;
  double worst_fixed = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    RngStream rng = RngStream(606).split(1, static_cast<std::uint64_t>(inst));
    const CountMatrix v = random_counts(rng, 8, 6, 9);
    const CountMatrix vt = v.transposed();
    FactorPair m{random_matrix(rng, 8, 3, 0.1, 1.0), random_matrix(rng, 3, 6, 0.1, 1.0)};
    double f = kl_divergence(v, m.W, m.H);
    for (int round = 0; round < 200; ++round) {
      m.H = mu_update_H(v, m.W, m.H);
      const double fh = kl_divergence(v, m.W, m.H);
      m.W = mu_update_H(vt, m.H.transpose(), m.W.transpose()).transpose();
      const double fw = kl_divergence(v, m.W, m.H);
      worst_increase = std::max({worst_increase, (fh - f) / std::max(1.0, std::abs(f)),
                                 (fw - fh) / std::max(1.0, std::abs(fh))});
      f = fw;
    }
    // V = WH exactly.
    const DMatrix w = random_matrix(rng, 8, 3, 0.1, 1.0);
    const DMatrix h = random_matrix(rng, 3, 6, 0.1, 1.0);
    const DenseCountMatrix<double> prod = w * h;
    const CountMatrix exact = CountMatrix::from_dense(prod);
    const DMatrix h2 = mu_update_H(exact, w, h);
    const DMatrix w2t = mu_update_H(exact.transposed(), h.transpose(), w.transpose());
    worst_fixed = std::max({worst_fixed, (h2 - h).cwiseQuotient(h).cwiseAbs().maxCoeff(),
                            (w2t.transpose() - w).cwiseQuotient(w).cwiseAbs().maxCoeff()});
  }
  r.pass = worst_increase <= 1e-10 && worst_fixed <= 1e-12;
  r.detail = "20 instances x 200 rounds, largest relative increase " + sci(worst_increase) +
             ", fixed-point drift " + sci(worst_fixed);
  return r;
}

CriterionResult criterion_7() {
  CriterionResult r = titled(7, "baseline formula checks");
  const std::vector<Eigen::Triplet<double>> t{{0, 0, 2.0}, {1, 0, 2.0}};
  const CountMatrix v(2, 1, t);
  const DMatrix w = DMatrix::Ones(2, 1);
  const DMatrix h = DMatrix::Ones(1, 1);
  const double mu = mu_update_H(v, w, h)(0, 0);
  CcdState state;
  DMatrix hc = h;
  ccd_update_H(v, w, state, hc);
  const double ccd = hc(0, 0);
  const double pgd = pgd_step(v, w, h, DMatrix::Ones(1, 1))(0, 0);
  const bool fixture = mu == 2.0 && ccd == 1.5 && pgd == 3.0;

  double worst = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    RngStream rng = RngStream(707).split(1, static_cast<std::uint64_t>(inst));
    const CountMatrix vr = random_counts(rng, 7, 5, 6);
    const DMatrix wr = random_matrix(rng, 7, 3, 0.1, 1.0);
    const DMatrix hr = random_matrix(rng, 3, 5, 0.1, 1.0);
    const DVector c = col_sums(wr);
    const DMatrix alpha = c.cwiseInverse().asDiagonal() * hr;
    const DMatrix a = pgd_step(vr, wr, hr, alpha);
    const DMatrix b = mu_update_H(vr, wr, hr);
    worst = std::max(worst, (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff()));
  }
  r.pass = fixture && worst <= 1e-12;
  r.detail = "MU " + sci(mu) + ", CCD " + sci(ccd) + ", PGD " + sci(pgd) +
             "; PGD with alpha=H/colsum(W) vs MU max error " + sci(worst) + " on 20 instances";
  return r;
}

CriterionResult criterion_8(const AcceptanceOptions& opt) {
  CriterionResult r = titled(8, "scaled-down convergence comparison");
  const auto start = Clock_::now();
  const CountMatrix v = gen_poisson({300, 300, 0.9, 8});
  const Index rank = 5;
  ReferenceBudget rb;
  rb.mu_rounds = 300;
  rb.exact_rounds = 10;
  rb.exact_inner_cap = 50;
  ReferenceObjective ref = compute_reference(v, rank, rb, std::nullopt, opt.threads);

  ExperimentGrid grid;
  grid.epoch_lengths = {10, 100};
  grid.replicates = 5;
  grid.rank = rank;
  grid.budget.max_rounds = 100000;
  grid.budget.max_work = 2e7;
  RunOptions ro;
  ro.master_seed = 800;
  ro.clock = Clock::work;
  ro.threads = opt.threads;
  GridSearchResult search = grid_search(v, spec("s-sci-pi"), grid, ro, ref);

  ro.rank = rank;
  ro.replicates = 5;
  ro.budget.max_rounds = 100000;
  ro.budget.max_work = 3e8;
  std::vector<ExperimentResult> all = std::move(search.table);
  const std::size_t best = search.best;
  all.push_back(run_experiment(v, spec("f-sci-pi"), GridPoint{}, ro, ref));
  all.push_back(run_experiment(v, spec("mu"), GridPoint{}, ro, ref));
  reconcile_reference(ref, all);
  const ExperimentResult& s = all[best];
  const ExperimentResult& f = all[all.size() - 2];
  const ExperimentResult& m = all.back();

  const double inf = std::numeric_limits<double>::infinity();
  auto reach = [&](const ExperimentResult& e, std::size_t rep) {
    const auto& run = e.runs[rep];
    if (run.diverged) return inf;
    return clock_to_reach(run.trace, 0.01, Clock::work).value_or(inf);
  };
  int ordered = 0;
  std::ostringstream per;
  for (std::size_t rep = 0; rep < 5; ++rep) {
    const double ws = reach(s, rep), wf = reach(f, rep), wm = reach(m, rep);
    const bool ok = std::isfinite(ws) && ws <= wf && wf < wm && ws < wm;
    ordered += ok ? 1 : 0;
    per << (rep ? " " : "") << sci(ws) << "/" << sci(wf) << "/" << sci(wm);
  }
  const double secs = std::chrono::duration<double>(Clock_::now() - start).count();
  r.pass = ordered >= 3 && secs < 300.0;
  std::ostringstream d;
  d << ordered << "/5 replicates ordered S<=F<MU; best s/n=" << s.point.batch_proportion
    << " m=" << s.point.epoch_length << " eta=" << s.point.step_size
    << "; work to 1e-2 (S/F/MU): " << per.str() << "; f*=" << format_real(ref.value)
    << (ref.invalidations ? " (lowered by study runs)" : "") << "; " << sci(secs) << " s";
  r.detail = d.str();
  return r;
}

CriterionResult criterion_9() {
  CriterionResult r = titled(9, "eigen-structure at solutions");
  RngStream rng(909);
  double worst_residual = 0.0;
  double worst_margin = std::numeric_limits<double>::infinity();
  int toys = 0;
  bool ok = true;

  auto assess = [&](const ScaleInvariantProblem<double>& problem, const DVector& x) {
    const auto diag = spectral_diagnostics(problem, x);
    const double residual = diag.eigenvector_residual / std::max(1.0, diag.hessian_norm);
    worst_residual = std::max(worst_residual, residual);
    worst_margin = std::min(worst_margin, (diag.multiplier - diag.tangent_radius) /
                                              std::abs(diag.multiplier));
    ok = ok && residual < 1e-4 && diag.local_maximum;
    ++toys;
  };

  {
    const auto pca = QuadraticProblem<double>::from_diagonal(
        (DVector(4) << 2.0, 1.0, 0.5, 0.1).finished());
    SolverConfig cfg;
    cfg.batch_size = 4;
    cfg.max_epochs = 200;
    const auto out = solve<double>(pca, cfg, DVector::Constant(4, 0.5));
    assess(pca, out.x);
  }
  for (Index d : {2, 3, 5, 8, 10}) {
    MixtureToy toy = mixture_toy(rng, 12, d, SamplingMode::row);
    SolverConfig cfg;
    cfg.batch_size = toy.problem.sample_count();
    cfg.max_epochs = 20000;
    const auto out = solve<double>(toy.problem, cfg, DVector::Constant(d, 1.0 / std::sqrt(d)));
    assess(toy.problem, out.x);
  }
  r.pass = ok;
  r.detail = std::to_string(toys) + " toys (PCA d=4, mixtures d=2..10), max residual " +
             sci(worst_residual) + ", min (lambda* - lambda-bar)/lambda* " + sci(worst_margin);
  return r;
}

CriterionResult criterion_10() {
  CriterionResult r = titled(10, "data layer");
  const CountMatrix g = gen_poisson({1000, 1000, 0.10, 10});
  const double frac = g.density();
  const bool poisson_ok = std::abs(frac - 0.10) <= 0.003;

  const std::vector<Eigen::Triplet<double>> t{{0, 0, 25.0}, {1, 0, 1.0}};
  const Preprocessed p = preprocess_min_sum(CountMatrix(2, 2, t), 20.0);
  const bool pre_ok = p.matrix.rows() == 1 && p.matrix.cols() == 1 && p.matrix.nnz() == 1 &&
                      p.matrix.value(0) == 25.0 && p.kept_rows == std::vector<Index>{0} &&
                      p.kept_cols == std::vector<Index>{0};

  std::istringstream uci("2\n3\n2\n1 2 5\n2 3 1\n");
  const CountMatrix u = load_uci_bow(uci);
  const auto trip = u.triplets();
  const bool uci_ok = u.rows() == 2 && u.cols() == 3 && trip.size() == 2 &&
                      trip[0].row() == 0 && trip[0].col() == 1 && trip[0].value() == 5.0 &&
                      trip[1].row() == 1 && trip[1].col() == 2 && trip[1].value() == 1.0;
  r.pass = poisson_ok && pre_ok && uci_ok;
  r.detail = "Poisson nonzero fraction " + sci(frac) + (poisson_ok ? "" : " (out of range)") +
             ", preprocess fixture " + (pre_ok ? "ok" : "WRONG") + ", UCI fixture " +
             (uci_ok ? "ok" : "WRONG");
  return r;
}

CriterionResult criterion_11() {
  CriterionResult r = titled(11, "gradient correctness");
  double worst = 0.0;
  for (int inst = 0; inst < 5; ++inst) {
    RngStream rng = RngStream(1111).split(1, static_cast<std::uint64_t>(inst));
    const CountMatrix v = random_counts(rng, 10, 4, 5);
    const DMatrix w = random_matrix(rng, 10, 3, 0.1, 1.0);
    const SubproblemBundle bundle = build_subproblems(v, w);
    for (Index j = 0; j < v.cols(); ++j) {
      if (v.col_nnz(j) == 0) continue;
      for (SamplingMode mode : {SamplingMode::row, SamplingMode::element}) {
        const auto problem = column_problem(bundle, v, j, mode);
        for (int point = 0; point < 5; ++point) {
          const DVector y = random_vector(rng, 3, 0.2, 1.0).normalized();
          worst = std::max(worst, check_gradient(problem, y));
          for (Index l = 0; l < problem.sample_count(); ++l) {
            worst = std::max(worst, check_sample_gradient(problem, l, y, default_fd_step(y)));
          }
        }
      }
    }
  }
  r.pass = worst < 1e-6;
  r.detail = "row and element mode, full and per-sample gradients, max error " + sci(worst);
  return r;
}

CriterionResult criterion_12(const AcceptanceOptions& opt) {
  CriterionResult r = titled(12, "harness determinism");
  namespace fs = std::filesystem;
  const fs::path dir = opt.work_dir.empty()
                           ? fs::temp_directory_path() / "sscipi-acceptance"
                           : fs::path(opt.work_dir);
  fs::create_directories(dir);
  GridConfig cfg;
  cfg.data.synthetic = SyntheticSpec{40, 30, 0.5, 12};
  cfg.solvers = {spec("s-sci-pi"), spec("f-sci-pi"), spec("mu")};
  cfg.grid.batch_proportions = {0.1, 1.0};
  cfg.grid.epoch_lengths = {10};
  cfg.grid.step_sizes = {0.1, 1.0};
  cfg.grid.replicates = 2;
  cfg.grid.rank = 3;
  cfg.grid.budget.max_rounds = 15;
  cfg.seed = 1234;
  cfg.clock = Clock::work;
  cfg.reference.mu_rounds = 100;
  cfg.reference.exact_rounds = 3;
  cfg.reference.exact_inner_cap = 20;

  auto read = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  // Second run on a different pool size.
  write_grid_outputs(run_grid(cfg, 1), (dir / "run1").string());
  write_grid_outputs(run_grid(cfg, std::max(4, opt.threads)), (dir / "run2").string());
  const std::string a = read(dir / "run1.csv");
  const std::string b = read(dir / "run2.csv");
  const bool json_same = read(dir / "run1.json") == read(dir / "run2.json");
  r.pass = !a.empty() && a == b;
  r.detail = "CSV " + std::to_string(a.size()) + " bytes, " + (a == b ? "identical" : "DIFFERENT") +
             "; JSON " + (json_same ? "identical" : "different") + " (1 and 4 workers)";
  return r;
}

}  // namespace

CriterionResult run_criterion(int id, const AcceptanceOptions& options) {
  const auto start = Clock_::now();
  CriterionResult r;
  try {
    switch (id) {
      case 1: r = criterion_1(); break;
      case 2: r = criterion_2(); break;
      case 3: r = criterion_3(); break;
      case 4: r = criterion_4(); break;
      case 5: r = criterion_5(); break;
      case 6: r = criterion_6(); break;
      case 7: r = criterion_7(); break;
      case 8: r = criterion_8(options); break;
      case 9: r = criterion_9(); break;
      case 10: r = criterion_10(); break;
      case 11: r = criterion_11(); break;
      case 12: r = criterion_12(options); break;
      default: throw std::invalid_argument("no criterion " + std::to_string(id));
    }
  } catch (const std::exception& e) {
    r.id = id;
    r.pass = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(Clock_::now() - start).count();
  return r;
}

std::string format_result(const CriterionResult& r) {
  char head[32];
  std::snprintf(head, sizeof head, "%s %2d ", r.pass ? "PASS" : "FAIL", r.id);
  char tail[32];
  std::snprintf(tail, sizeof tail, " [%.2f s]", r.seconds);
  return std::string(head) + r.title + ": " + r.detail + tail;
}

}  // namespace sscipi
