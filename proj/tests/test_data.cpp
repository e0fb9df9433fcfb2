#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sscipi/data.hpp"
#include "util.hpp"

using namespace sscipi;
using namespace sscipi::test;

TEST_CASE("load_uci_bow") {
  std::istringstream in("2\n3\n2\n1 2 5\n2 3 1\n");
  const auto v = load_uci_bow(in);
  CHECK(v.rows() == 2);
  CHECK(v.cols() == 3);
  const auto t = v.triplets();
  REQUIRE(t.size() == 2);
  CHECK((t[0].row() == 0 && t[0].col() == 1 && t[0].value() == 5.0));
  CHECK((t[1].row() == 1 && t[1].col() == 2 && t[1].value() == 1.0));

  std::istringstream empty("4\n5\n0\n");
  const auto e = load_uci_bow(empty);
  CHECK((e.rows() == 4 && e.cols() == 5 && e.nnz() == 0));

  std::istringstream dup("1\n1\n2\n1 1 2\n1 1 2\n");
  std::vector<std::string> warnings;
  const auto d = load_uci_bow(dup, &warnings);
  CHECK(d.nnz() == 1);
  CHECK(d.value(0) == 4.0);
  CHECK(warnings.empty());  // the header counts lines, not distinct entries

  std::istringstream short_body("2\n2\n3\n1 1 1\n");
  load_uci_bow(short_body, &warnings);
  CHECK(warnings.size() == 1);
}

TEST_CASE("load_uci_bow rejects malformed input") {
  std::istringstream range("2\n2\n1\n3 1 1\n");
  CHECK_THROWS_AS(load_uci_bow(range), ParseError);
  std::istringstream junk("2\n2\n1\n1 x 1\n");
  try {
    load_uci_bow(junk);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 4);
  }
  std::istringstream frac("1\n1\n1\n1 1 0.5\n");
  CHECK_THROWS_AS(load_uci_bow(frac, nullptr, true), ParseError);
  std::istringstream neg("1\n1\n1\n1 1 -2\n");
  CHECK_THROWS(load_uci_bow(neg));
}

TEST_CASE("load_dense") {
  std::istringstream csv("1,2\n3,4\n");
  const auto a = load_dense(csv, DenseFormat::csv);
  CHECK(a == (DMat(2, 2) << 1, 2, 3, 4).finished());

  std::istringstream mm(
      "%%MatrixMarket matrix coordinate real general\n% comment\n2 3 1\n2 3 7.5\n");
  const auto b = load_dense(mm, DenseFormat::matrix_market);
  CHECK((b.rows() == 2 && b.cols() == 3));
  CHECK(b(1, 2) == 7.5);
  CHECK(b.sum() == 7.5);

  std::istringstream arr("%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n");
  CHECK(load_dense(arr, DenseFormat::matrix_market) == (DMat(2, 2) << 1, 3, 2, 4).finished());

  std::istringstream sym(
      "%%MatrixMarket matrix coordinate integer symmetric\n2 2 2\n1 1 1\n2 1 5\n");
  CHECK(load_dense(sym, DenseFormat::matrix_market) == (DMat(2, 2) << 1, 5, 5, 0).finished());

  std::istringstream negative("1,-1\n");
  CHECK_THROWS(load_dense(negative, DenseFormat::csv));
  std::istringstream ragged("1,2\n3\n");
  CHECK_THROWS_AS(load_dense(ragged, DenseFormat::csv), ParseError);
}

TEST_CASE("file round trips") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "sscipi-test-data";
  fs::create_directories(dir);
  RngStream rng(1);
  const auto v = random_counts(rng, 7, 5, 6);

  write_uci_bow(v, (dir / "v.txt").string());
  CHECK(load_counts((dir / "v.txt").string(), "uci").to_dense() == v.to_dense());

  {
    std::ofstream out(dir / "v.mtx");
    write_matrix_market(v, out);
  }
  CHECK(load_counts((dir / "v.mtx").string(), "mm").to_dense() == v.to_dense());

  {
    std::ofstream out(dir / "v.csv");
    write_csv(v.to_dense(), out);
  }
  CHECK(load_counts((dir / "v.csv").string(), "csv").to_dense() == v.to_dense());
  CHECK_THROWS(load_counts((dir / "v.csv").string(), "xls"));
  CHECK_THROWS(load_counts((dir / "missing.txt").string(), "uci"));

  // Non-integer values survive at full precision.
  const DMat frac = (DMat(1, 2) << 0.1, 1.0 / 3.0).finished();
  std::stringstream s;
  write_csv(frac, s);
  CHECK(load_dense(s, DenseFormat::csv) == frac);
}

TEST_CASE("preprocess_min_sum") {
  const auto v = counts(2, 2, {{0, 0, 25.0}, {1, 0, 1.0}});
  const auto p = preprocess_min_sum(v, 20.0);
  CHECK(p.matrix.to_dense() == DMat::Constant(1, 1, 25.0));
  CHECK(p.kept_rows == std::vector<Index>{0});
  CHECK(p.kept_cols == std::vector<Index>{0});

  RngStream rng(2);
  const auto r = random_counts(rng, 6, 5, 9);
  const auto id = preprocess_min_sum(r, 0.0);
  CHECK(id.matrix.to_dense() == r.to_dense());
  CHECK(id.kept_rows.size() == 6);
  CHECK(id.kept_cols.size() == 5);

  const auto big = counts(2, 2, {{0, 0, 30.0}, {0, 1, 30.0}, {1, 0, 30.0}, {1, 1, 30.0}});
  CHECK(preprocess_min_sum(big, 20.0).matrix.to_dense() == big.to_dense());

  // Kept maps compose with V, and every kept sum meets the threshold.
  const auto q = preprocess_min_sum(r, 15.0);
  const DMat full = r.to_dense();
  const DMat kept = q.matrix.to_dense();
  for (std::size_t a = 0; a < q.kept_rows.size(); ++a) {
    for (std::size_t b = 0; b < q.kept_cols.size(); ++b) {
      CHECK(kept(static_cast<Index>(a), static_cast<Index>(b)) ==
            full(q.kept_rows[a], q.kept_cols[b]));
    }
  }
  for (Index j = 0; j < kept.cols(); ++j) CHECK(kept.col(j).sum() >= 15.0);
  CHECK_THROWS(preprocess_min_sum(r, 1e9));
}

TEST_CASE("gen_poisson") {
  SyntheticSpec s{10, 10, 0.9, 0};
  CHECK(s.rate() == doctest::Approx(2.302585).epsilon(1e-6));
  CHECK(1.0 - std::exp(-s.rate()) == doctest::Approx(0.9).epsilon(1e-15));

  const auto g = gen_poisson({1000, 1000, 0.10, 3});
  CHECK(std::abs(g.density() - 0.10) <= 0.003);
  const auto mean = static_cast<double>(row_sums(g).sum()) / 1e6;
  CHECK(mean == doctest::Approx(-std::log(0.9)).epsilon(0.03));

  const SyntheticSpec small{50, 40, 0.5, 11};
  CHECK(gen_poisson(small).to_dense() == gen_poisson(small).to_dense());
  CHECK(gen_poisson(small).to_dense() != gen_poisson({50, 40, 0.5, 12}).to_dense());
  CHECK_THROWS(gen_poisson({5, 5, 1.0, 0}));
  CHECK_THROWS(gen_poisson({5, 5, 0.0, 0}));
}

TEST_CASE("describe") {
  const auto m = describe(counts(2, 3, {{0, 0, 1.0}}), "toy", "mem", "uci");
  CHECK(m.rows == 2);
  CHECK(m.cols == 3);
  CHECK(m.nnz == 1);
  CHECK(m.preprocessing == "none");
}
