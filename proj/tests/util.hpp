#ifndef SSCIPI_TESTS_UTIL_HPP
#define SSCIPI_TESTS_UTIL_HPP

#include <vector>

#include "sscipi/matrix.hpp"
#include "sscipi/sampling.hpp"

namespace sscipi::test {

using DMat = Matrix<double>;
using CountMatrix = SparseCountMatrix<double>;
using DVec = Vector<double>;

inline DVec random_vector(RngStream& rng, Index n, double lo = -1.0, double hi = 1.0) {
  DVec v(n);
  for (Index i = 0; i < n; ++i) v[i] = lo + (hi - lo) * rng.uniform();
  return v;
}

inline DMat random_matrix(RngStream& rng, Index r, Index c, double lo = 0.0, double hi = 1.0) {
  DMat m(r, c);
  for (Index j = 0; j < c; ++j) {
    for (Index i = 0; i < r; ++i) m(i, j) = lo + (hi - lo) * rng.uniform();
  }
  return m;
}

inline SparseCountMatrix<double> random_counts(RngStream& rng, Index n, Index m, int max_count) {
  std::vector<Eigen::Triplet<double>> t;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) {
      const auto c = rng.uniform_index(static_cast<std::uint64_t>(max_count) + 1);
      if (c > 0) t.emplace_back(static_cast<int>(i), static_cast<int>(j), static_cast<double>(c));
    }
  }
  return SparseCountMatrix<double>(n, m, t);
}

inline SparseCountMatrix<double> counts(Index n, Index m,
                                        std::vector<Eigen::Triplet<double>> t) {
  return SparseCountMatrix<double>(n, m, t);
}

}  // namespace sscipi::test

#endif  // SSCIPI_TESTS_UTIL_HPP
