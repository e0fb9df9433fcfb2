#include <doctest.h>

#include <map>

#include "sscipi/sampling.hpp"
#include "util.hpp"

using namespace sscipi;
using namespace sscipi::test;

TEST_CASE("RngStream splits are path-determined") {
  RngStream a(42);
  RngStream b(42);
  for (int i = 0; i < 100; ++i) a.next_u64();
  CHECK(a.split(1, 2).next_u64() == b.split(1, 2).next_u64());
  CHECK(a.split(1, 2).next_u64() != a.split(1, 3).next_u64());
  CHECK(a.split(1, 2).next_u64() != a.split(2, 2).next_u64());
  RngStream c(7);
  for (int i = 0; i < 1000; ++i) {
    const double u = c.uniform();
    CHECK((u >= 0.0 && u < 1.0));
    CHECK(c.uniform_index(5) < 5);
  }
}

TEST_CASE("sample_rows") {
  RngStream rng(1);
  CHECK(sample_rows(5, 5, rng, false) == std::vector<Index>{0, 1, 2, 3, 4});
  RngStream r1(99), r2(99);
  CHECK(sample_rows(4, 2, r1, false) == sample_rows(4, 2, r2, false));
  CHECK_THROWS_AS(sample_rows(3, 4, rng, false), std::invalid_argument);
  CHECK(sample_rows(3, 6, rng, true).size() == 6);

  std::vector<int> hits(10, 0);
  RngStream mc(2024);
  const int draws = 100000;
  for (int d = 0; d < draws; ++d) {
    const auto s = sample_rows(10, 3, mc, false);
    CHECK_MESSAGE(std::adjacent_find(s.begin(), s.end()) == s.end(), "duplicate index");
    for (Index i : s) ++hits[static_cast<std::size_t>(i)];
  }
  for (int h : hits) CHECK(std::abs(h / double(draws) - 0.3) <= 0.01);
}

TEST_CASE("sample_nonzeros") {
  const auto one = counts(3, 3, {{1, 2, 4.0}});
  RngStream rng(5);
  for (int i = 0; i < 10; ++i) CHECK(sample_nonzeros(one, 1, rng, false) == std::vector<Index>{0});
  const auto five = counts(2, 3, {{0, 0, 1.0}, {0, 2, 1.0}, {1, 0, 2.0}, {1, 1, 1.0}, {1, 2, 3.0}});
  CHECK(sample_nonzeros(five, 5, rng, false) == std::vector<Index>{0, 1, 2, 3, 4});
  std::vector<int> hits(5, 0);
  const int draws = 100000;
  for (int d = 0; d < draws; ++d) {
    for (Index t : sample_nonzeros(five, 2, rng, false)) ++hits[static_cast<std::size_t>(t)];
  }
  for (int h : hits) CHECK(std::abs(h / double(draws) - 0.4) <= 0.01);
  CHECK_THROWS(sample_nonzeros(CountMatrix(), 1, rng, false));
}

TEST_CASE("row_stochastic_gradient") {
  const DMat v_s = DMat::Constant(1, 1, 2.0);
  CHECK(row_stochastic_gradient(v_s, DMat::Ones(1, 1), DMat::Ones(1, 1), 2, 1)(0, 0) == 4.0);
  CHECK(row_stochastic_gradient(DMat::Zero(1, 2), DMat::Ones(1, 1), DMat::Ones(1, 2), 2, 1)
            .isZero());

  RngStream rng(6);
  const auto v = random_counts(rng, 6, 4, 3);
  const DMat w = random_matrix(rng, 6, 2, 0.1, 1.0);
  const DMat h = random_matrix(rng, 2, 4, 0.1, 1.0);
  const std::vector<Index> all{0, 1, 2, 3, 4, 5};
  const DMat full = full_multiplier(v, w, h);
  CHECK((row_stochastic_gradient(v, all, w, h) - full).cwiseAbs().maxCoeff() <= 1e-13);
  const DMat dense = row_stochastic_gradient(DMat(v.to_dense()), w, h, 6, 6);
  CHECK((dense - full).cwiseAbs().maxCoeff() <= 1e-13);

  DMat mean = DMat::Zero(2, 4);
  for (Index i = 0; i < 6; ++i) {
    const std::vector<Index> s{i};
    mean += row_stochastic_gradient(v, s, w, h);
  }
  CHECK((mean / 6.0 - full).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("element_stochastic_gradient") {
  const auto single = counts(2, 2, {{1, 0, 3.0}});
  const DMat w = (DMat(2, 2) << 0.5, 1.0, 0.2, 0.7).finished();
  const DMat h = (DMat(2, 2) << 1.0, 2.0, 0.5, 0.3).finished();
  const std::vector<Index> only{0};
  CHECK((DMat(element_stochastic_gradient(single, only, w, h)) - full_multiplier(single, w, h))
            .cwiseAbs()
            .maxCoeff() <= 1e-15);

  const auto three = counts(2, 2, {{0, 0, 1.0}, {0, 1, 2.0}, {1, 1, 4.0}});
  const DMat full = full_multiplier(three, w, h);
  const std::vector<Index> all{0, 1, 2};
  CHECK((DMat(element_stochastic_gradient(three, all, w, h)) - full).cwiseAbs().maxCoeff() <=
        1e-14);
  DMat mean = DMat::Zero(2, 2);
  for (Index t = 0; t < 3; ++t) {
    const std::vector<Index> s{t};
    mean += DMat(element_stochastic_gradient(three, s, w, h));
  }
  CHECK((mean / 3.0 - full).cwiseAbs().maxCoeff() <= 1e-12);
}
