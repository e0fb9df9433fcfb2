#ifndef SSCIPI_PROBLEMS_HPP
#define SSCIPI_PROBLEMS_HPP

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sscipi/matrix.hpp"
#include "sscipi/sampling.hpp"
#include "sscipi/scipi.hpp"

namespace sscipi {

/// f(x) = (1/n) sum_l 1/2 x^T A_l x, degree 2. With A_l = a_l a_l^T this is
/// the PCA objective for data rows a_l.
template <typename Scalar>
class QuadraticProblem final : public ScaleInvariantProblem<Scalar> {
 public:
  using VectorType = Vector<Scalar>;

  explicit QuadraticProblem(std::vector<Matrix<Scalar>> terms) : terms_(std::move(terms)) {
    if (terms_.empty()) throw std::invalid_argument("no quadratic terms");
    const Index d = terms_.front().rows();
    for (const auto& a : terms_) {
      if (a.rows() != d || a.cols() != d) throw ShapeError("terms must be d x d");
    }
  }

  /// Covariance-style problem from the rows of `data`.
  template <typename Derived>
  static QuadraticProblem from_rows(const Eigen::MatrixBase<Derived>& data) {
    std::vector<Matrix<Scalar>> terms;
    for (Index l = 0; l < data.rows(); ++l) {
      const VectorType a = data.row(l).transpose();
      terms.push_back(a * a.transpose());
    }
    return QuadraticProblem(std::move(terms));
  }

  /// A = diag(d) written as n = d.size() rank-one samples sqrt(n d_l) e_l.
  static QuadraticProblem from_diagonal(const VectorType& diag) {
    const Index n = diag.size();
    std::vector<Matrix<Scalar>> terms;
    for (Index l = 0; l < n; ++l) {
      Matrix<Scalar> a = Matrix<Scalar>::Zero(n, n);
      a(l, l) = static_cast<Scalar>(n) * diag[l];
      terms.push_back(std::move(a));
    }
    return QuadraticProblem(std::move(terms));
  }

  Matrix<Scalar> mean_matrix() const {
    Matrix<Scalar> sum = Matrix<Scalar>::Zero(dimension(), dimension());
    for (const auto& a : terms_) sum += a;
    return sum / static_cast<Scalar>(terms_.size());
  }

  Index dimension() const override { return terms_.front().rows(); }
  Index sample_count() const override { return static_cast<Index>(terms_.size()); }
  Scalar degree() const override { return Scalar(2); }

  Scalar value(const VectorType& x) const override {
    Scalar sum = 0;
    for (Index l = 0; l < sample_count(); ++l) sum += value_sample(l, x);
    return sum / static_cast<Scalar>(sample_count());
  }
  Scalar value_sample(Index l, const VectorType& x) const override {
    return Scalar(0.5) * x.dot(terms_[static_cast<std::size_t>(l)] * x);
  }
  VectorType grad_sample(Index l, const VectorType& x) const override {
    return terms_[static_cast<std::size_t>(l)] * x;
  }

 private:
  std::vector<Matrix<Scalar>> terms_;
};

/// f(x) = (1/n) sum_l ||B_l x||, degree 1.
template <typename Scalar>
class NormSumProblem final : public ScaleInvariantProblem<Scalar> {
 public:
  using VectorType = Vector<Scalar>;

  explicit NormSumProblem(std::vector<Matrix<Scalar>> terms) : terms_(std::move(terms)) {
    if (terms_.empty()) throw std::invalid_argument("no norm terms");
    const Index d = terms_.front().cols();
    for (const auto& b : terms_) {
      if (b.cols() != d) throw ShapeError("terms must have d columns");
    }
  }

  Index dimension() const override { return terms_.front().cols(); }
  Index sample_count() const override { return static_cast<Index>(terms_.size()); }
  Scalar degree() const override { return Scalar(1); }

  Scalar value(const VectorType& x) const override {
    Scalar sum = 0;
    for (Index l = 0; l < sample_count(); ++l) sum += value_sample(l, x);
    return sum / static_cast<Scalar>(sample_count());
  }
  Scalar value_sample(Index l, const VectorType& x) const override {
    return (terms_[static_cast<std::size_t>(l)] * x).norm();
  }
  VectorType grad_sample(Index l, const VectorType& x) const override {
    const auto& b = terms_[static_cast<std::size_t>(l)];
    const VectorType bx = b * x;
    const Scalar norm = bx.norm();
    if (!(norm > Scalar(0))) return VectorType::Zero(dimension());
    return b.transpose() * bx / norm;
  }

 private:
  std::vector<Matrix<Scalar>> terms_;
};

/// Mixture-proportion log-likelihood in sphere coordinates:
/// f(y) = sum_i v_i log (L y^2)_i, degree 0.
///
/// Samples are the rows of L (row mode, n = N) or only the rows with v_i > 0
/// (element mode, n = number of nonzeros). Each f_l carries the factor n so
/// the sample mean reproduces the unnormalized sum.
template <typename Scalar>
class MixtureProblem final : public ScaleInvariantProblem<Scalar> {
 public:
  using VectorType = Vector<Scalar>;

  MixtureProblem(Matrix<Scalar> l, VectorType v, SamplingMode mode)
      : l_(std::move(l)), v_(std::move(v)), mode_(mode) {
    if (l_.rows() != v_.size()) throw ShapeError("L rows must match v");
    if (!all_nonnegative(l_) || !all_nonnegative(v_)) {
      throw std::domain_error("L and v must be nonnegative");
    }
    for (Index i = 0; i < v_.size(); ++i) {
      if (mode_ == SamplingMode::row || v_[i] > 0) rows_.push_back(i);
    }
    if (rows_.empty()) throw std::invalid_argument("no samples");
  }

  const Matrix<Scalar>& mixing() const { return l_; }
  const VectorType& weights() const { return v_; }
  SamplingMode mode() const { return mode_; }
  /// Data row behind sample l.
  Index sample_row(Index l) const { return rows_[static_cast<std::size_t>(l)]; }

  Index dimension() const override { return l_.cols(); }
  Index sample_count() const override { return static_cast<Index>(rows_.size()); }
  Scalar degree() const override { return Scalar(0); }

  Scalar value(const VectorType& y) const override {
    const VectorType z = l_ * y.cwiseAbs2();
    Scalar sum = 0;
    for (Index i = 0; i < v_.size(); ++i) {
      if (v_[i] > 0) {
        if (!(z[i] > 0)) return -std::numeric_limits<Scalar>::infinity();
        sum += v_[i] * std::log(z[i]);
      }
    }
    return sum;
  }

  Scalar value_sample(Index l, const VectorType& y) const override {
    const Index i = sample_row(l);
    if (v_[i] == 0) return 0;
    const Scalar z = l_.row(i).dot(y.cwiseAbs2());
    if (!(z > 0)) return -std::numeric_limits<Scalar>::infinity();
    return static_cast<Scalar>(sample_count()) * v_[i] * std::log(z);
  }

  VectorType grad_sample(Index l, const VectorType& y) const override {
    const Index i = sample_row(l);
    if (v_[i] == 0) return VectorType::Zero(dimension());
    const Scalar z = std::max(l_.row(i).dot(y.cwiseAbs2()), Scalar(kDenominatorFloor));
    const Scalar c = Scalar(2) * static_cast<Scalar>(sample_count()) * v_[i] / z;
    return c * l_.row(i).transpose().cwiseProduct(y);
  }

 private:
  Matrix<Scalar> l_;
  VectorType v_;
  SamplingMode mode_;
  std::vector<Index> rows_;
};

}  // namespace sscipi

#endif  // SSCIPI_PROBLEMS_HPP
