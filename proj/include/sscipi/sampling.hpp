#ifndef SSCIPI_SAMPLING_HPP
#define SSCIPI_SAMPLING_HPP

#include <algorithm>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "sscipi/matrix.hpp"

namespace sscipi {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace detail

/// Seeded 64-bit stream. Children derived with split() depend only on this
/// stream's seed and the (tag, index) path, never on how many numbers the
/// parent has produced. Bounded integers and doubles are derived from raw
/// mt19937_64 output without std distributions, so sequences are identical
/// across standard libraries.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  RngStream split(std::uint64_t tag, std::uint64_t index) const {
    std::uint64_t h = detail::splitmix64(seed_ ^ detail::splitmix64(tag + 0x51ed27));
    h = detail::splitmix64(h + detail::splitmix64(index ^ 0x2545f4914f6cdd1dULL));
    return RngStream(h);
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on [0, n), n >= 1. Lemire's multiply-and-reject.
  std::uint64_t uniform_index(std::uint64_t n) {
    unsigned __int128 m = static_cast<unsigned __int128>(engine_()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(engine_()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

enum class SamplingMode { row, element };

struct BatchSpec {
  SamplingMode mode = SamplingMode::element;
  Index size = 1;
  bool replacement = false;
};

/// Draws s indices from [0, n), sorted ascending.
///
/// Without replacement this is a partial Fisher-Yates shuffle over a virtual
/// pool, O(s) work and memory.
inline std::vector<Index> sample_rows(Index n, Index s, RngStream& rng,
                                      bool replacement) {
  if (s < 0 || n < 0) throw std::invalid_argument("negative sample size");
  if (s > 0 && n == 0) throw std::invalid_argument("sampling from empty set");
  if (!replacement && s > n) {
    throw std::invalid_argument("sample size " + std::to_string(s) +
                                " exceeds population " + std::to_string(n) +
                                " without replacement");
  }
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(s));
  if (replacement) {
    for (Index k = 0; k < s; ++k) {
      out.push_back(static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(n))));
    }
  } else if (s == n) {
    for (Index k = 0; k < n; ++k) out.push_back(k);
    return out;
  } else {
    std::unordered_map<Index, Index> displaced;
    auto at = [&](Index k) {
      auto it = displaced.find(k);
      return it == displaced.end() ? k : it->second;
    };
    for (Index k = 0; k < s; ++k) {
      const Index pick =
          k + static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(n - k)));
      const Index chosen = at(pick);
      displaced[pick] = at(k);
      out.push_back(chosen);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Uniform sample of triplet indices of V.
template <typename Scalar>
std::vector<Index> sample_nonzeros(const SparseCountMatrix<Scalar>& v, Index s,
                                   RngStream& rng, bool replacement) {
  if (v.nnz() == 0) throw std::invalid_argument("matrix has no nonzeros");
  return sample_rows(v.nnz(), s, rng, replacement);
}

/// (n/s) W_S^T [V_S / (W_S H)] for gathered rows V_S (s x M) and W_S (s x K).
template <typename DV, typename DW, typename DH>
Matrix<typename DH::Scalar> row_stochastic_gradient(const Eigen::MatrixBase<DV>& v_s,
                                                    const Eigen::MatrixBase<DW>& w_s,
                                                    const Eigen::MatrixBase<DH>& h,
                                                    Index n, Index s) {
  using Scalar = typename DH::Scalar;
  detail::check_factor_shapes(v_s.rows(), v_s.cols(), w_s, h);
  if (s <= 0) throw ShapeError("batch size must be positive");
  Matrix<Scalar> ratio = Matrix<Scalar>::Zero(v_s.rows(), v_s.cols());
  for (Index j = 0; j < v_s.cols(); ++j) {
    for (Index r = 0; r < v_s.rows(); ++r) {
      const Scalar x = v_s(r, j);
      if (x != Scalar(0)) {
        const Scalar z = std::max(w_s.row(r).dot(h.col(j)), Scalar(kDenominatorFloor));
        ratio(r, j) = x / z;
      }
    }
  }
  return (static_cast<Scalar>(n) / static_cast<Scalar>(s)) * (w_s.transpose() * ratio);
}

/// Row-gathered form over a sparse V: uses only the nonzeros of the sampled
/// rows. Duplicate rows (with-replacement batches) contribute repeatedly.
template <typename Scalar, typename DW, typename DH>
Matrix<Scalar> row_stochastic_gradient(const SparseCountMatrix<Scalar>& v,
                                       std::span<const Index> rows,
                                       const Eigen::MatrixBase<DW>& w,
                                       const Eigen::MatrixBase<DH>& h) {
  detail::check_factor_shapes(v.rows(), v.cols(), w, h);
  if (rows.empty()) throw ShapeError("empty row batch");
  Matrix<Scalar> grad = Matrix<Scalar>::Zero(h.rows(), h.cols());
  for (Index i : rows) {
    for (Index t = v.row_begin(i); t < v.row_end(i); ++t) {
      const Index j = v.col(t);
      const Scalar z = std::max(w.row(i).dot(h.col(j)), Scalar(kDenominatorFloor));
      grad.col(j) += (v.value(t) / z) * w.row(i).transpose();
    }
  }
  grad *= static_cast<Scalar>(v.rows()) / static_cast<Scalar>(rows.size());
  return grad;
}

/// (|I|/s) sum over sampled nonzeros of W_{i1,:} V_{i1,i2} / (W H)_{i1,i2}
/// placed in column i2. Only touched columns carry entries.
template <typename Scalar, typename DW, typename DH>
Eigen::SparseMatrix<Scalar> element_stochastic_gradient(
    const SparseCountMatrix<Scalar>& v, std::span<const Index> batch,
    const Eigen::MatrixBase<DW>& w, const Eigen::MatrixBase<DH>& h) {
  detail::check_factor_shapes(v.rows(), v.cols(), w, h);
  if (batch.empty()) throw ShapeError("empty element batch");
  const Scalar scale = static_cast<Scalar>(v.nnz()) / static_cast<Scalar>(batch.size());
  std::vector<Eigen::Triplet<Scalar>> entries;
  entries.reserve(batch.size() * static_cast<std::size_t>(h.rows()));
  for (Index t : batch) {
    const Index i = v.row(t);
    const Index j = v.col(t);
    const Scalar z = std::max(w.row(i).dot(h.col(j)), Scalar(kDenominatorFloor));
    const Scalar c = scale * v.value(t) / z;
    for (Index k = 0; k < h.rows(); ++k) {
      entries.emplace_back(static_cast<int>(k), static_cast<int>(j), c * w(i, k));
    }
  }
  Eigen::SparseMatrix<Scalar> grad(h.rows(), h.cols());
  grad.setFromTriplets(entries.begin(), entries.end());
  return grad;
}

/// Full multiplier W^T [V / (WH)] over the nonzeros of V.
template <typename Scalar, typename DW, typename DH>
Matrix<Scalar> full_multiplier(const SparseCountMatrix<Scalar>& v,
                               const Eigen::MatrixBase<DW>& w,
                               const Eigen::MatrixBase<DH>& h) {
  detail::check_factor_shapes(v.rows(), v.cols(), w, h);
  Matrix<Scalar> grad = Matrix<Scalar>::Zero(h.rows(), h.cols());
  for (Index i = 0; i < v.rows(); ++i) {
    for (Index t = v.row_begin(i); t < v.row_end(i); ++t) {
      const Index j = v.col(t);
      const Scalar z = std::max(w.row(i).dot(h.col(j)), Scalar(kDenominatorFloor));
      grad.col(j) += (v.value(t) / z) * w.row(i).transpose();
    }
  }
  return grad;
}

}  // namespace sscipi

#endif  // SSCIPI_SAMPLING_HPP
