#ifndef SSCIPI_MATRIX_HPP
#define SSCIPI_MATRIX_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sscipi/errors.hpp"

namespace sscipi {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
/// Row-major dense storage for count data (V) loaded from disk.
template <typename Scalar>
using DenseCountMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Any ratio V/Z is formed with Z floored here.
inline constexpr double kDenominatorFloor = 1e-15;

template <typename Derived>
bool all_nonnegative(const Eigen::DenseBase<Derived>& x) {
  return (x.derived().array() >= typename Derived::Scalar(0)).all();
}

/// Nonnegative count matrix in CSR form with a column-major mirror.
///
/// Structural zeros are never stored and column indices ascend within each
/// row. Entries are addressed by their triplet index t, the position in CSR
/// order. The CSC mirror is built on first use and shared between copies; the
/// object is immutable after construction, so concurrent readers are safe.
template <typename Scalar>
class SparseCountMatrix {
 public:
  using Csr = Eigen::SparseMatrix<Scalar, Eigen::RowMajor>;
  using Csc = Eigen::SparseMatrix<Scalar, Eigen::ColMajor>;
  using Triplet = Eigen::Triplet<Scalar>;

  SparseCountMatrix() : SparseCountMatrix(0, 0, std::span<const Triplet>{}) {}

  /// Duplicate triplets are summed; entries summing to zero are dropped.
  SparseCountMatrix(Index rows, Index cols, std::span<const Triplet> triplets)
      : csr_(rows, cols), mirror_(std::make_shared<Mirror>()) {
    for (const auto& t : triplets) {
      if (t.row() < 0 || t.row() >= rows || t.col() < 0 || t.col() >= cols) {
        throw ShapeError("triplet (" + std::to_string(t.row()) + "," +
                         std::to_string(t.col()) + ") outside " +
                         std::to_string(rows) + "x" + std::to_string(cols));
      }
      if (!(t.value() >= Scalar(0))) {
        throw std::domain_error("negative or NaN count at (" +
                                std::to_string(t.row()) + "," +
                                std::to_string(t.col()) + ")");
      }
    }
    csr_.setFromTriplets(triplets.begin(), triplets.end());
    csr_.prune([](Index, Index, const Scalar& v) { return v != Scalar(0); });
    csr_.makeCompressed();
    row_of_.resize(static_cast<std::size_t>(csr_.nonZeros()));
    for (Index i = 0; i < rows; ++i) {
      for (Index t = row_begin(i); t < row_end(i); ++t) {
        row_of_[static_cast<std::size_t>(t)] = i;
      }
    }
  }

  template <typename Derived>
  static SparseCountMatrix from_dense(const Eigen::MatrixBase<Derived>& dense) {
    std::vector<Triplet> triplets;
    for (Index i = 0; i < dense.rows(); ++i) {
      for (Index j = 0; j < dense.cols(); ++j) {
        if (dense(i, j) != Scalar(0)) {
          triplets.emplace_back(static_cast<int>(i), static_cast<int>(j),
                                static_cast<Scalar>(dense(i, j)));
        }
      }
    }
    return SparseCountMatrix(dense.rows(), dense.cols(), triplets);
  }

  Index rows() const { return csr_.rows(); }
  Index cols() const { return csr_.cols(); }
  Index nnz() const { return csr_.nonZeros(); }
  double density() const {
    const double cells = static_cast<double>(rows()) * static_cast<double>(cols());
    return cells > 0 ? static_cast<double>(nnz()) / cells : 0.0;
  }

  Index row(Index t) const { return row_of_[static_cast<std::size_t>(t)]; }
  Index col(Index t) const { return csr_.innerIndexPtr()[t]; }
  Scalar value(Index t) const { return csr_.valuePtr()[t]; }
  Index row_begin(Index i) const { return csr_.outerIndexPtr()[i]; }
  Index row_end(Index i) const { return csr_.outerIndexPtr()[i + 1]; }

  const Csr& csr() const { return csr_; }

  const Csc& csc() const { return mirror().csc; }
  Index col_begin(Index j) const { return mirror().csc.outerIndexPtr()[j]; }
  Index col_end(Index j) const { return mirror().csc.outerIndexPtr()[j + 1]; }
  Index col_nnz(Index j) const { return col_end(j) - col_begin(j); }
  /// Row index of CSC position p.
  Index csc_row(Index p) const { return mirror().csc.innerIndexPtr()[p]; }
  Scalar csc_value(Index p) const { return mirror().csc.valuePtr()[p]; }
  /// Triplet index (CSR position) of CSC position p.
  Index csc_triplet(Index p) const {
    return mirror().to_triplet[static_cast<std::size_t>(p)];
  }

  SparseCountMatrix transposed() const {
    std::vector<Triplet> triplets;
    triplets.reserve(static_cast<std::size_t>(nnz()));
    for (Index t = 0; t < nnz(); ++t) {
      triplets.emplace_back(static_cast<int>(col(t)), static_cast<int>(row(t)),
                            value(t));
    }
    return SparseCountMatrix(cols(), rows(), triplets);
  }

  DenseCountMatrix<Scalar> to_dense() const {
    DenseCountMatrix<Scalar> out = DenseCountMatrix<Scalar>::Zero(rows(), cols());
    for (Index t = 0; t < nnz(); ++t) out(row(t), col(t)) = value(t);
    return out;
  }

  std::vector<Triplet> triplets() const {
    std::vector<Triplet> out;
    out.reserve(static_cast<std::size_t>(nnz()));
    for (Index t = 0; t < nnz(); ++t) {
      out.emplace_back(static_cast<int>(row(t)), static_cast<int>(col(t)),
                       value(t));
    }
    return out;
  }

 private:
  struct Mirror {
    std::once_flag once;
    Csc csc;
    std::vector<Index> to_triplet;
  };

  const Mirror& mirror() const {
    std::call_once(mirror_->once, [this] {
      auto& m = *mirror_;
      m.csc = Csc(csr_);
      m.csc.makeCompressed();
      // Counting sort over CSR order gives ascending rows within each column,
      // the same order Eigen's storage conversion produces.
      std::vector<Index> next(m.csc.outerIndexPtr(),
                              m.csc.outerIndexPtr() + cols());
      m.to_triplet.assign(static_cast<std::size_t>(nnz()), 0);
      for (Index t = 0; t < nnz(); ++t) {
        m.to_triplet[static_cast<std::size_t>(next[col(t)]++)] = t;
      }
    });
    return *mirror_;
  }

  Csr csr_;
  std::vector<Index> row_of_;
  std::shared_ptr<Mirror> mirror_;
};

// ---------------------------------------------------------------------------
// Sums

template <typename Derived>
Vector<typename Derived::Scalar> row_sums(const Eigen::MatrixBase<Derived>& a) {
  return a.rowwise().sum();
}

template <typename Derived>
Vector<typename Derived::Scalar> col_sums(const Eigen::MatrixBase<Derived>& a) {
  return a.colwise().sum().transpose();
}

template <typename Scalar>
Vector<Scalar> row_sums(const SparseCountMatrix<Scalar>& a) {
  Vector<Scalar> out = Vector<Scalar>::Zero(a.rows());
  for (Index t = 0; t < a.nnz(); ++t) out[a.row(t)] += a.value(t);
  return out;
}

template <typename Scalar>
Vector<Scalar> col_sums(const SparseCountMatrix<Scalar>& a) {
  Vector<Scalar> out = Vector<Scalar>::Zero(a.cols());
  for (Index t = 0; t < a.nnz(); ++t) out[a.col(t)] += a.value(t);
  return out;
}

// ---------------------------------------------------------------------------
// Products

namespace detail {
template <typename DW, typename DH>
void check_factor_shapes(Index rows, Index cols, const Eigen::MatrixBase<DW>& w,
                         const Eigen::MatrixBase<DH>& h) {
  if (w.rows() != rows || h.cols() != cols || w.cols() != h.rows()) {
    throw ShapeError("factor shapes " + std::to_string(w.rows()) + "x" +
                     std::to_string(w.cols()) + " * " + std::to_string(h.rows()) +
                     "x" + std::to_string(h.cols()) + " do not match data " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
}
}  // namespace detail

/// (WH)_{ij} at every stored entry of `pattern`, in triplet order.
template <typename Scalar, typename DW, typename DH>
Vector<Scalar> product_at_nonzeros(const Eigen::MatrixBase<DW>& w,
                                   const Eigen::MatrixBase<DH>& h,
                                   const SparseCountMatrix<Scalar>& pattern) {
  detail::check_factor_shapes(pattern.rows(), pattern.cols(), w, h);
  Vector<Scalar> out(pattern.nnz());
  for (Index i = 0; i < pattern.rows(); ++i) {
    for (Index t = pattern.row_begin(i); t < pattern.row_end(i); ++t) {
      out[t] = w.row(i).dot(h.col(pattern.col(t)));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// KL divergence

/// Generalized KL divergence D(V || WH) for dense V.
///
/// Uses 0 log 0 = 0. Returns +inf when some V_ij > 0 meets (WH)_ij at or
/// below the denominator floor.
template <typename DV, typename DW, typename DH>
typename DV::Scalar kl_divergence(const Eigen::MatrixBase<DV>& v,
                                  const Eigen::MatrixBase<DW>& w,
                                  const Eigen::MatrixBase<DH>& h) {
  using Scalar = typename DV::Scalar;
  detail::check_factor_shapes(v.rows(), v.cols(), w, h);
  const Matrix<Scalar> z = w * h;
  Scalar total = 0;
  for (Index i = 0; i < v.rows(); ++i) {
    for (Index j = 0; j < v.cols(); ++j) {
      const Scalar vij = v(i, j);
      const Scalar zij = z(i, j);
      if (vij > 0) {
        if (!(zij > Scalar(kDenominatorFloor))) {
          return std::numeric_limits<Scalar>::infinity();
        }
        total += vij * std::log(vij / zij) - vij + zij;
      } else {
        total += zij;
      }
    }
  }
  return total;
}

/// KL divergence from precomputed products at the nonzeros of V.
///
/// `total_mass` is the sum of every entry of WH.
template <typename Scalar>
Scalar kl_divergence_from_products(const SparseCountMatrix<Scalar>& v,
                                   const Vector<Scalar>& z_at_nonzeros,
                                   Scalar total_mass) {
  Scalar total = 0;
  for (Index t = 0; t < v.nnz(); ++t) {
    const Scalar z = z_at_nonzeros[t];
    if (!(z > Scalar(kDenominatorFloor))) {
      return std::numeric_limits<Scalar>::infinity();
    }
    const Scalar x = v.value(t);
    total += x * std::log(x / z) - x;
  }
  return total + total_mass;
}

/// Sparse KL divergence: the log term over nonzeros only, the linear term as
/// sum_k (sum_i W_ik)(sum_j H_kj) so WH is never materialized.
template <typename Scalar, typename DW, typename DH>
Scalar kl_divergence(const SparseCountMatrix<Scalar>& v,
                     const Eigen::MatrixBase<DW>& w,
                     const Eigen::MatrixBase<DH>& h) {
  const Vector<Scalar> z = product_at_nonzeros(w, h, v);
  const Scalar mass = col_sums(w).dot(row_sums(h));
  return kl_divergence_from_products(v, z, mass);
}

// ---------------------------------------------------------------------------
// Rescaling

/// Divides every column by its sum. Throws ZeroSumError naming the first
/// column whose sum is not positive.
template <typename Derived>
Matrix<typename Derived::Scalar> column_rescale(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  Matrix<Scalar> out = x;
  for (Index j = 0; j < out.cols(); ++j) {
    const Scalar s = out.col(j).sum();
    if (!(s > Scalar(0))) throw ZeroSumError("zero-sum column", j);
    out.col(j) /= s;
  }
  return out;
}

}  // namespace sscipi

#endif  // SSCIPI_MATRIX_HPP
