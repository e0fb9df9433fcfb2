#include <doctest.h>

#include <cmath>

#include "sscipi/problems.hpp"
#include "sscipi/scipi.hpp"
#include "util.hpp"

using namespace sscipi;
using namespace sscipi::test;

namespace {

QuadraticProblem<double> pca21() {
  return QuadraticProblem<double>::from_diagonal((DVec(2) << 2.0, 1.0).finished());
}

MixtureProblem<double> toy31() {
  return MixtureProblem<double>(DMat::Identity(2, 2), (DVec(2) << 3.0, 1.0).finished(),
                                SamplingMode::row);
}

const DVec kDiag = (DVec(2) << 1.0, 1.0).finished() / std::sqrt(2.0);

}  // namespace

TEST_CASE("sci_pi_step") {
  const DVec x = sci_pi_step(pca21(), kDiag);
  const DVec expect = (DVec(2) << 2.0, 1.0).finished() / std::sqrt(5.0);
  CHECK((x - expect).norm() <= 1e-15);
  CHECK((sci_pi_step<double>(pca21(), DVec::Unit(2, 0)) - DVec::Unit(2, 0)).norm() == 0.0);
  const DVec y = sci_pi_step(toy31(), kDiag);
  CHECK(y[0] * y[0] == doctest::Approx(0.9).epsilon(1e-14));
  CHECK_THROWS_AS(sci_pi_step<double>(pca21(), DVec::Zero(2)), DegeneratePointError);
}

TEST_CASE("snapshot_alpha") {
  const DVec x0 = DVec::Unit(3, 1);
  CHECK(*snapshot_alpha<double>(x0, x0, 0.0) == doctest::Approx(1.0));
  const DVec xt = (DVec(3) << 0.3, -0.7, 0.2).finished();
  CHECK(*snapshot_alpha<double>(xt, -x0, 2.0) == doctest::Approx(0.7));
  const DVec half = (DVec(2) << 0.5, 0.5).finished();
  CHECK(*snapshot_alpha<double>(half, DVec::Unit(2, 0), 0.0) == doctest::Approx(2.0));
  CHECK_FALSE(snapshot_alpha<double>(DVec::Unit(2, 1), DVec::Unit(2, 0), 0.0).has_value());
}

TEST_CASE("svrg_gradient reductions") {
  RngStream rng(3);
  const auto problem = QuadraticProblem<double>::from_rows(random_matrix(rng, 3, 2, -1, 1));
  const DVec x0 = random_vector(rng, 2).normalized();
  const DVec xt = x0 + 0.3 * random_vector(rng, 2);
  const DVec g0 = problem.grad_full(x0);
  const std::vector<Index> all{0, 1, 2};
  CHECK((*svrg_gradient<double>(problem, xt, x0, g0, all, 2.0) - problem.grad_full(xt)).norm() <=
        1e-14);
  // x_t = x_0 unit and p = 1: alpha = 1, so the batch terms cancel.
  const std::vector<Index> one{1};
  CHECK((*svrg_gradient<double>(problem, x0, x0, g0, one, 1.0) - g0).norm() <= 1e-14);

  DVec mean = DVec::Zero(2);
  for (Index l = 0; l < 3; ++l) {
    const std::vector<Index> s{l};
    mean += *svrg_gradient<double>(problem, xt, x0, g0, s, 2.0);
  }
  CHECK((mean / 3.0 - problem.grad_full(xt)).norm() <= 1e-13);
  CHECK_THROWS(svrg_gradient<double>(problem, xt, x0, g0, {}, 2.0));
}

TEST_CASE("inner_step") {
  const DVec x = DVec::Unit(2, 0);
  const DVec g = (DVec(2) << 0.3, 0.4).finished();
  CHECK(inner_step<double>(x, g, 1.0, 2.0) == g);
  CHECK(inner_step<double>(x, g, 0.0, 2.0) == x);
  const DVec r = inner_step<double>((DVec(2) << 2.0, 0.0).finished(), DVec::Unit(2, 0), 0.5, 0.0);
  CHECK(r == (DVec(2) << 3.0, 0.0).finished());
  CHECK_THROWS_AS(inner_step<double>(DVec::Zero(2), g, 1.0, 2.0), DegeneratePointError);
}

TEST_CASE("solve reduces to power iteration on PCA") {
  SolverConfig cfg;
  cfg.batch_size = 2;
  cfg.epoch_length = 7;
  cfg.max_epochs = 5;
  std::vector<DVec> seen;
  solve<double>(pca21(), cfg, kDiag, RngStream(0),
                [&](Index, Index, const DVec& x) { seen.push_back(x / x.norm()); });
  REQUIRE(seen.size() == 35);
  DVec p = kDiag;
  for (const auto& x : seen) {
    p = (DVec(2) << 2.0 * p[0], p[1]).finished().normalized();
    CHECK((x - p).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("solve on the mixture toy reaches the multinomial MLE") {
  SolverConfig cfg;
  cfg.batch_size = 2;
  cfg.step_size = 0.5;
  cfg.max_epochs = 200;
  const auto out = solve<double>(toy31(), cfg, kDiag);
  CHECK(std::abs(out.x[0] * out.x[0] - 0.75) <= 1e-8);
  CHECK(std::abs(out.x[1] * out.x[1] - 0.25) <= 1e-8);
}

TEST_CASE("full-batch eta=1 SCI-PI oscillates on the L=I mixture toy") {
  // Documented behaviour: the y-space step maps X to rescale(v^2 / X), so
  // X alternates between (0.5, 0.5) and (0.9, 0.1) forever.
  SolverConfig cfg;
  cfg.batch_size = 2;
  cfg.max_epochs = 101;
  const auto out = solve<double>(toy31(), cfg, kDiag);
  CHECK(out.x[0] * out.x[0] == doctest::Approx(0.9));
  SolverConfig even = cfg;
  even.max_epochs = 100;
  const auto back = solve<double>(toy31(), even, kDiag);
  CHECK(back.x[0] * back.x[0] == doctest::Approx(0.5));
}

TEST_CASE("solve edge cases") {
  SolverConfig cfg;
  cfg.max_epochs = 0;
  const auto out = solve<double>(pca21(), cfg, kDiag);
  CHECK((out.x - kDiag).norm() <= 1e-15);
  CHECK(out.termination == Termination::epochs);
  CHECK(out.trace.records.size() == 1);

  SolverConfig bad;
  bad.step_size = 0.0;
  CHECK_THROWS_AS(solve<double>(pca21(), bad, kDiag), std::invalid_argument);
  bad = SolverConfig{};
  bad.batch_size = 3;
  CHECK_THROWS_AS(solve<double>(pca21(), bad, kDiag), std::invalid_argument);
  CHECK_THROWS_AS(solve<double>(pca21(), SolverConfig{}, DVec::Zero(2)), DegeneratePointError);
  CHECK_THROWS_AS(solve<double>(pca21(), SolverConfig{}, DVec::Ones(3)), ShapeError);
}

TEST_CASE("solve stops on objective tolerance and counts work") {
  SolverConfig cfg;
  cfg.batch_size = 1;
  cfg.epoch_length = 3;
  cfg.max_epochs = 1000;
  cfg.objective_tolerance = 1e-12;
  const auto out = solve<double>(pca21(), cfg, kDiag, RngStream(9));
  CHECK(out.termination == Termination::tolerance);
  CHECK(out.epochs_used < 1000);
  const auto& recs = out.trace.records;
  for (std::size_t i = 1; i < recs.size(); ++i) CHECK(recs[i].work > recs[i - 1].work);
}

TEST_CASE("solve is deterministic per seed") {
  SolverConfig cfg;
  cfg.batch_size = 1;
  cfg.epoch_length = 5;
  cfg.max_epochs = 10;
  RngStream rng(4);
  const auto problem = QuadraticProblem<double>::from_rows(random_matrix(rng, 6, 3, -1, 1));
  const DVec x = DVec::Ones(3).normalized();
  const auto a = solve<double>(problem, cfg, x, RngStream(17));
  const auto b = solve<double>(problem, cfg, x, RngStream(17));
  CHECK(a.x == b.x);
}

TEST_CASE("stochastic S-SCI-PI converges linearly on a random PCA problem") {
  RngStream rng(8);
  const DMat rows = random_matrix(rng, 200, 5, -1, 1) *
                    (DVec(5) << 3.0, 1.0, 0.8, 0.5, 0.2).finished().asDiagonal();
  const auto problem = QuadraticProblem<double>::from_rows(rows);
  Eigen::SelfAdjointEigenSolver<DMat> eig(problem.mean_matrix());
  const DVec top = eig.eigenvectors().col(4);
  SolverConfig cfg;
  cfg.batch_size = 20;
  cfg.epoch_length = 20;
  cfg.step_size = 0.5;
  cfg.max_epochs = 40;
  const auto out = solve<double>(problem, cfg, DVec::Ones(5).normalized(), RngStream(2));
  CHECK(1.0 - std::pow(out.x.dot(top), 2) <= 1e-12);
}

TEST_CASE("norm-sum problem is degree 1") {
  RngStream rng(12);
  std::vector<DMat> terms{random_matrix(rng, 3, 3, -1, 1), random_matrix(rng, 2, 3, -1, 1)};
  const NormSumProblem<double> p(terms);
  const DVec x = random_vector(rng, 3);
  CHECK(p.value(2.5 * x) == doctest::Approx(2.5 * p.value(x)));
  CHECK(p.grad_full(x).dot(x) == doctest::Approx(p.value(x)));  // Euler: p f(x)
}
