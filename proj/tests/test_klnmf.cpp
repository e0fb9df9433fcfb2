#include <doctest.h>

#include <cmath>

#include "sscipi/baselines.hpp"
#include "sscipi/klnmf.hpp"
#include "sscipi/verify.hpp"
#include "util.hpp"

using namespace sscipi;
using namespace sscipi::test;

namespace {

CountMatrix v31() { return counts(2, 1, {{0, 0, 3.0}, {1, 0, 1.0}}); }

StochasticConfig stochastic(double prop, Index m, double eta, SamplingMode mode,
                            std::uint64_t seed = 1) {
  StochasticConfig c;
  c.batch_proportion = prop;
  c.epoch_length = m;
  c.step_size = eta;
  c.mode = mode;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("build_subproblems") {
  const auto v = counts(2, 2, {{0, 0, 1.0}, {1, 1, 1.0}});
  const auto b = build_subproblems(v, (DMat(2, 2) << 1, 0, 0, 2).finished());
  CHECK(b.L == DMat::Identity(2, 2));
  CHECK(b.w_col_sums == (DVec(2) << 1, 2).finished());
  const auto c = build_subproblems(v31(), DMat::Ones(2, 1));
  CHECK(c.L == DMat::Constant(2, 1, 0.5));
  CHECK_THROWS_AS(build_subproblems(v31(), DMat::Ones(3, 1)), ShapeError);
  CHECK_THROWS_AS(build_subproblems(v31(), (DMat(2, 2) << 1, 0, 1, 0).finished()), ZeroSumError);

  // Warm start from H: X_j = normalize(c .* H_j).
  const auto w = build_subproblems(v, (DMat(2, 2) << 1, 0, 0, 2).finished(),
                                   (DMat(2, 2) << 1, 1, 1, 3).finished());
  CHECK(w.Y(0, 1) * w.Y(0, 1) == doctest::Approx(1.0 / 7.0));
}

TEST_CASE("column problem gradient on the L=I toy") {
  const auto b = build_subproblems(v31(), DMat::Identity(2, 2));
  const auto p = column_problem(b, v31(), 0, SamplingMode::row);
  const DVec y = (DVec(2) << 1.0, 1.0).finished() / std::sqrt(2.0);
  const DVec g = p.grad_full(y);
  CHECK(g[0] == doctest::Approx(3.0 * std::sqrt(2.0) * 2.0));
  CHECK(g[1] == doctest::Approx(1.0 * std::sqrt(2.0) * 2.0));
}

TEST_CASE("recover_H") {
  SubproblemBundle b;
  b.Y = DMat::Ones(1, 1);
  b.v_col_sums = DVec::Constant(1, 4.0);
  b.w_col_sums = DVec::Constant(1, 2.0);
  CHECK(recover_H(b)(0, 0) == 2.0);

  b.Y = (DMat(2, 1) << 1.0, 0.0).finished();
  b.v_col_sums = DVec::Constant(1, 6.0);
  b.w_col_sums = (DVec(2) << 3.0, 5.0).finished();
  CHECK(recover_H(b) == (DMat(2, 1) << 2.0, 0.0).finished());

  // K = 1 mass conservation: sum_i (WH)_ij = sum_i V_ij.
  RngStream rng(3);
  const auto v = random_counts(rng, 5, 4, 3);
  const DMat w = random_matrix(rng, 5, 1, 0.1, 1.0);
  const auto bundle = build_subproblems(v, w);
  const DMat h = recover_H(bundle);
  const DVec mass = col_sums(v);
  for (Index j = 0; j < 4; ++j) CHECK((w * h).col(j).sum() == doctest::Approx(mass[j]));
}

TEST_CASE("vanilla_stochastic_update_H") {
  const DMat x = DMat::Constant(2, 1, 0.5);
  const VanillaBatch all{SamplingMode::row, {0, 1}};
  const auto r = vanilla_stochastic_update_H(v31(), DMat::Identity(2, 2), x, all, 1.0);
  CHECK(r.X(0, 0) == doctest::Approx(0.9));
  CHECK(r.X(1, 0) == doctest::Approx(0.1));
  const VanillaBatch elems{SamplingMode::element, {0, 1}};
  CHECK((vanilla_stochastic_update_H(v31(), DMat::Identity(2, 2), x, elems, 1.0).X - r.X)
            .norm() <= 1e-15);
  CHECK(vanilla_stochastic_update_H(v31(), DMat::Identity(2, 2), x, all, 0.0).X == x);
  CHECK(r.clamped == 0);
  CHECK_THROWS(vanilla_stochastic_update_H(v31(), DMat::Identity(2, 2), x, all, 1.5));
}

TEST_CASE("clamp_multiplier") {
  const auto c = clamp_multiplier((DVec(2) << -0.1, 0.5).finished());
  CHECK(c.values == (DVec(2) << 0.0, 0.5).finished());
  CHECK(c.clamped == 1);
  const DVec pos = (DVec(3) << 0.0, 1.0, 2.0).finished();
  CHECK(clamp_multiplier(pos).values == pos);
  CHECK(clamp_multiplier(pos).clamped == 0);

  // Full-batch epochs never clamp.
  RngStream rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const auto v = random_counts(rng, 8, 6, 4);
    auto b = build_subproblems(v, random_matrix(rng, 8, 3, 0.1, 1.0));
    const auto rep = svrg_epoch_all_columns(b, v, stochastic(1.0, 1, 1.0, SamplingMode::row),
                                            FactorTag::H, 1);
    CHECK(rep.clamped == 0);
  }
}

TEST_CASE("full-batch single-step epoch equals one SCI-PI step per column") {
  RngStream rng(5);
  const auto v = random_counts(rng, 7, 5, 4);
  const DMat w = random_matrix(rng, 7, 3, 0.1, 1.0);
  for (SamplingMode mode : {SamplingMode::row, SamplingMode::element}) {
    auto b = build_subproblems(v, w);
    const DMat y_before = b.Y;
    svrg_epoch_all_columns(b, v, stochastic(1.0, 1, 1.0, mode), FactorTag::H, 1);
    for (Index j = 0; j < v.cols(); ++j) {
      if (v.col_nnz(j) == 0) continue;
      const auto p = column_problem(b, v, j, mode);
      const DVec step = sci_pi_step<double>(p, y_before.col(j));
      CHECK((b.Y.col(j) - step).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }
}

TEST_CASE("single-column epoch agrees with solve") {
  RngStream rng(6);
  const auto v = random_counts(rng, 12, 1, 5);
  const DMat w = random_matrix(rng, 12, 3, 0.1, 1.0);
  for (SamplingMode mode : {SamplingMode::row, SamplingMode::element}) {
    auto b = build_subproblems(v, w);
    const DVec y0 = b.Y.col(0);
    const auto cfg = stochastic(0.3, 6, 0.4, mode, 77);
    svrg_epoch_all_columns(b, v, cfg, FactorTag::H, 3, 2);

    const auto p = column_problem(build_subproblems(v, w), v, 0, mode);
    SolverConfig sc;
    sc.step_size = cfg.step_size;
    sc.batch_size = batch_size_for(cfg.batch_proportion, p.sample_count());
    sc.epoch_length = cfg.epoch_length;
    sc.max_epochs = 1;
    sc.nonnegative_gradient = true;
    const RngStream stream = mode == SamplingMode::row
                                 ? round_stream(77, FactorTag::H, 3, 2)
                                 : column_stream(77, FactorTag::H, 3, 2, 0);
    const auto out = solve<double>(p, sc, y0, stream);
    CHECK((b.Y.col(0) - out.x).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("empty columns are left untouched and flagged") {
  const auto v = counts(3, 3, {{0, 0, 2.0}, {1, 2, 1.0}, {2, 0, 1.0}});
  const DMat w = (DMat(3, 2) << 1, 0.5, 0.2, 1, 0.7, 0.3).finished();
  for (SamplingMode mode : {SamplingMode::row, SamplingMode::element}) {
    auto b = build_subproblems(v, w);
    b.Y.col(1) = (DVec(2) << 0.6, 0.8).finished();
    const auto rep = svrg_epoch_all_columns(b, v, stochastic(1.0, 3, 0.5, mode), FactorTag::H, 1);
    CHECK(rep.empty_columns == std::vector<Index>{1});
    CHECK(b.Y.col(1) == (DVec(2) << 0.6, 0.8).finished());
  }
  // The updater keeps H's column as it was.
  DMat h = (DMat(2, 3) << 1, 2, 3, 4, 5, 6).finished();
  StochasticScipiUpdater up(stochastic(1.0, 2, 0.5, SamplingMode::row));
  UpdateContext ctx;
  up.update_H(v, w, h, ctx);
  CHECK(h.col(1) == (DVec(2) << 2, 5).finished());
}

TEST_CASE("epochs are deterministic per seed and keep unit columns") {
  RngStream rng(8);
  const auto v = random_counts(rng, 20, 10, 3);
  const DMat w = random_matrix(rng, 20, 4, 0.1, 1.0);
  for (SamplingMode mode : {SamplingMode::row, SamplingMode::element}) {
    auto a = build_subproblems(v, w);
    auto b = build_subproblems(v, w);
    const auto cfg = stochastic(0.2, 10, 0.3, mode, 5);
    const auto ra = svrg_epoch_all_columns(a, v, cfg, FactorTag::H, 2);
    const auto rb = svrg_epoch_all_columns(b, v, cfg, FactorTag::H, 2);
    CHECK(a.Y == b.Y);
    CHECK(ra.work == rb.work);
    CHECK(ra.work > 0.0);
    for (Index j = 0; j < v.cols(); ++j) {
      if (v.col_nnz(j) > 0) CHECK(a.Y.col(j).norm() == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("update_W mirrors update_H under transposition") {
  RngStream rng(9);
  const DMat half = random_matrix(rng, 6, 6);
  const DMat sym = (half + half.transpose()).array().round();
  const auto v = CountMatrix::from_dense(sym);
  const DMat h = random_matrix(rng, 3, 6, 0.1, 1.0);
  std::vector<std::unique_ptr<FactorUpdater>> solvers;
  solvers.push_back(std::make_unique<MuUpdater>());
  solvers.push_back(std::make_unique<FullScipiUpdater>());
  solvers.push_back(std::make_unique<StochasticScipiUpdater>(
      stochastic(1.0, 3, 0.5, SamplingMode::row)));
  for (auto& s : solvers) {
    FactorPair a{h.transpose(), h};
    DMat h2 = h;
    UpdateContext hc;
    s->update_H(v, a.W, h2, hc);
    UpdateContext wc;
    wc.tag = FactorTag::W;
    update_W(v.transposed(), a, *s, wc);
    CHECK((a.W - h2.transpose()).cwiseAbs().maxCoeff() <= 1e-13);
  }
}

TEST_CASE("MU-based W update") {
  // V = [[2,2]] with W = [[1]], H = [[1,1]]: W' = (2/1 + 2/1) / (1 + 1) = 2.
  const auto v = counts(1, 2, {{0, 0, 2.0}, {0, 1, 2.0}});
  FactorPair t{DMat::Ones(1, 1), DMat::Ones(1, 2)};
  MuUpdater mu;
  UpdateContext ctx;
  update_W(v.transposed(), t, mu, ctx);
  CHECK(t.W(0, 0) == 2.0);

  RngStream rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    const auto r = random_counts(rng, 6, 5, 4);
    FactorPair p{random_matrix(rng, 6, 2, 0.1, 1.0), random_matrix(rng, 2, 5, 0.1, 1.0)};
    const double before = kl_divergence(r, p.W, p.H);
    update_W(r.transposed(), p, mu, ctx);
    CHECK(kl_divergence(r, p.W, p.H) <= before + 1e-12);
  }
}

TEST_CASE("alternate") {
  const auto v = counts(2, 1, {{0, 0, 2.0}, {1, 0, 2.0}});
  MuUpdater mu;
  AlternateOptions opt;
  opt.budget.max_rounds = 1;
  const auto res = alternate(v, FactorPair{DMat::Ones(2, 1), DMat::Ones(1, 1)}, mu, mu, opt);
  CHECK(res.model.H(0, 0) == 2.0);
  CHECK(res.trace.records.back().objective == doctest::Approx(0.0).epsilon(1e-15));
  REQUIRE(res.trace.records.size() == 2);

  opt.budget.max_rounds = 0;
  const FactorPair start{DMat::Constant(2, 1, 0.3), DMat::Constant(1, 1, 0.7)};
  const auto none = alternate(v, start, mu, mu, opt);
  CHECK(none.model.W == start.W);
  CHECK(none.model.H == start.H);
  CHECK(none.trace.records.size() == 1);

  opt.budget.max_rounds = -1;
  CHECK_THROWS(alternate(v, start, mu, mu, opt));
}

TEST_CASE("exact scheme with F-SCI-PI fits the (3,1) toy column") {
  // W moves too, so the alternation escapes the fixed-W oscillation and
  // reaches V = WH, the multinomial MLE for the column.
  FullScipiUpdater f;
  AlternateOptions opt;
  opt.scheme = Scheme::exact;
  opt.budget.max_rounds = 50;
  opt.exact_inner_cap = 200;
  const auto res =
      alternate(v31(), FactorPair{DMat::Identity(2, 2), DMat::Constant(2, 1, 2.0)}, f, f, opt);
  const DMat z = res.model.W * res.model.H;
  CHECK(z(0, 0) / z.sum() == doctest::Approx(0.75).epsilon(1e-8));
  CHECK(res.trace.records.back().objective <= 1e-8);
}

TEST_CASE("alternate respects work budgets and records monotone clocks") {
  RngStream rng(12);
  const auto v = random_counts(rng, 30, 20, 3);
  StochasticScipiUpdater s(stochastic(0.3, 5, 0.3, SamplingMode::element));
  AlternateOptions opt;
  opt.budget.max_rounds = 1000;
  opt.budget.max_work = 5e4;
  const auto res = alternate(
      v, FactorPair{random_matrix(rng, 30, 3, 0.1, 1), random_matrix(rng, 3, 20, 0.1, 1)}, s, s,
      opt);
  const auto& r = res.trace.records;
  CHECK(r.size() < 1001);
  CHECK(r[r.size() - 2].work < 5e4);
  for (std::size_t i = 1; i < r.size(); ++i) {
    CHECK(r[i].work >= r[i - 1].work);
    CHECK(r[i].seconds >= r[i - 1].seconds);
  }
}

TEST_CASE("stabilize and default sampling mode") {
  FactorPair m{(DMat(2, 2) << 0, 1, 0, 1).finished(), (DMat(2, 2) << 1, 1, 0, 0).finished()};
  stabilize(m);
  CHECK(m.W.col(0).minCoeff() == kFactorFloor);
  CHECK(m.H.row(1).minCoeff() == kFactorFloor);
  CHECK(default_sampling_mode(counts(2, 2, {{0, 0, 1.0}})) == SamplingMode::element);
  CHECK(default_sampling_mode(counts(2, 2, {{0, 0, 1.0}, {1, 1, 1.0}})) == SamplingMode::row);
}

TEST_CASE("KL subproblem gradients are correct in both modes") {
  RngStream rng(13);
  const auto v = random_counts(rng, 9, 3, 4);
  const auto b = build_subproblems(v, random_matrix(rng, 9, 3, 0.1, 1.0));
  for (Index j = 0; j < 3; ++j) {
    for (SamplingMode mode : {SamplingMode::row, SamplingMode::element}) {
      const auto p = column_problem(b, v, j, mode);
      const DVec y = random_vector(rng, 3, 0.2, 1.0).normalized();
      CHECK(check_gradient(p, y) < 1e-6);
    }
  }
}
