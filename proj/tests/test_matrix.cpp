#include <doctest.h>

#include "sscipi/matrix.hpp"
#include "util.hpp"

using namespace sscipi;
using namespace sscipi::test;

TEST_CASE("kl_divergence fixtures") {
  const DMat one = DMat::Ones(1, 1);
  CHECK(kl_divergence(one, one, one) == 0.0);

  const DMat v = DMat::Identity(2, 2);
  const DMat w = DMat::Ones(2, 1);
  const DMat h = DMat::Ones(1, 2);
  CHECK(kl_divergence(v, w, h) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(kl_divergence(CountMatrix::from_dense(v), w, h) == doctest::Approx(2.0).epsilon(1e-15));

  const auto v2 = counts(2, 1, {{0, 0, 2.0}, {1, 0, 2.0}});
  CHECK(kl_divergence(v2, DMat::Ones(2, 1), DMat::Constant(1, 1, 2.0)) == 0.0);
}

TEST_CASE("kl_divergence is +inf when a nonzero meets a zero product") {
  const auto v = counts(1, 1, {{0, 0, 1.0}});
  CHECK(std::isinf(kl_divergence(v, DMat::Zero(1, 1), DMat::Ones(1, 1))));
}

TEST_CASE("sparse and dense kl_divergence agree and are rebalancing invariant") {
  RngStream rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto v = random_counts(rng, 6, 5, 4);
    const DMat w = random_matrix(rng, 6, 3, 0.1, 1.0);
    const DMat h = random_matrix(rng, 3, 5, 0.1, 1.0);
    const double sparse = kl_divergence(v, w, h);
    const double dense = kl_divergence(DMat(v.to_dense()), w, h);
    CHECK(sparse == doctest::Approx(dense).epsilon(1e-12));
    const DVec d = random_vector(rng, 3, 0.1, 10.0);
    const DMat w2 = w * d.asDiagonal();
    const DMat h2 = d.cwiseInverse().asDiagonal() * h;
    CHECK(std::abs(kl_divergence(v, w2, h2) - sparse) <= 1e-10 * std::max(1.0, sparse));
  }
}

TEST_CASE("column_rescale") {
  const DMat x = (DMat(2, 2) << 1, 3, 1, 1).finished();
  const DMat r = column_rescale(x);
  CHECK(r(0, 0) == 0.5);
  CHECK(r(1, 0) == 0.5);
  CHECK(r(0, 1) == 0.75);
  CHECK(r(1, 1) == 0.25);
  CHECK((column_rescale(r) - r).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK_THROWS_AS(column_rescale(DMat::Zero(2, 1)), ZeroSumError);
  try {
    column_rescale((DMat(2, 2) << 1, 0, 1, 0).finished());
  } catch (const ZeroSumError& e) {
    CHECK(e.index() == 1);
  }
}

TEST_CASE("row and column sums") {
  const DMat a = (DMat(2, 2) << 1, 2, 3, 4).finished();
  CHECK(row_sums(a) == (DVec(2) << 3, 7).finished());
  CHECK(col_sums(CountMatrix(3, 4, std::span<const Eigen::Triplet<double>>{})) == DVec::Zero(4));
  const auto v = counts(2, 3, {{0, 1, 5.0}, {1, 2, 1.0}});
  CHECK(col_sums(v) == (DVec(3) << 0, 5, 1).finished());
  CHECK(row_sums(v) == (DVec(2) << 5, 1).finished());
}

TEST_CASE("product_at_nonzeros") {
  const auto v = counts(2, 1, {{0, 0, 1.0}, {1, 0, 3.0}});
  CHECK(product_at_nonzeros(DMat::Ones(2, 1), DMat::Constant(1, 1, 2.0), v) ==
        (DVec(2) << 2, 2).finished());
  CHECK(product_at_nonzeros(DMat::Zero(2, 1), DMat::Constant(1, 1, 2.0), v) == DVec::Zero(2));
  CHECK_THROWS_AS(product_at_nonzeros(DMat::Ones(3, 1), DMat::Ones(1, 1), v), ShapeError);

  RngStream rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = random_counts(rng, 5, 5, 2);
    const DMat w = random_matrix(rng, 5, 2);
    const DMat h = random_matrix(rng, 2, 5);
    const DMat full = w * h;
    const DVec z = product_at_nonzeros(w, h, p);
    for (Index t = 0; t < p.nnz(); ++t) CHECK(z[t] == doctest::Approx(full(p.row(t), p.col(t))));
  }
}

TEST_CASE("sparse count matrix storage") {
  const auto v = counts(3, 3, {{2, 0, 1.0}, {0, 2, 2.0}, {0, 0, 3.0}, {0, 0, 1.0}, {1, 1, 0.0}});
  CHECK(v.nnz() == 3);
  CHECK(v.value(0) == 4.0);  // duplicates summed, explicit zero dropped
  CHECK(v.col(1) == 2);
  CHECK(v.col_nnz(0) == 2);
  CHECK(v.csc_triplet(v.col_begin(0) + 1) == 2);
  const auto t = v.transposed();
  CHECK(t.to_dense() == v.to_dense().transpose());
  CHECK_THROWS_AS(counts(2, 2, {{2, 0, 1.0}}), ShapeError);
  CHECK_THROWS_AS(counts(2, 2, {{0, 0, -1.0}}), std::domain_error);
}
