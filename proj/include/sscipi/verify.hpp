#ifndef SSCIPI_VERIFY_HPP
#define SSCIPI_VERIFY_HPP

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "sscipi/matrix.hpp"
#include "sscipi/scipi.hpp"

namespace sscipi {

/// Default central-difference step: 1e-5 max(1, ||x||).
template <typename Derived>
typename Derived::Scalar default_fd_step(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return Scalar(1e-5) * std::max(Scalar(1), x.norm());
}

/// Largest componentwise |fd_k - g_k| / max(1, |g_k|, |fd_k|) where fd is the
/// central difference of `value`.
template <typename Scalar>
Scalar check_gradient(const std::function<Scalar(const Vector<Scalar>&)>& value,
                      const Vector<Scalar>& gradient, const Vector<Scalar>& x,
                      Scalar h) {
  if (!(h > 0)) throw std::invalid_argument("finite-difference step must be positive");
  if (gradient.size() != x.size()) throw ShapeError("gradient size mismatch");
  Scalar worst = 0;
  Vector<Scalar> probe = x;
  for (Index k = 0; k < x.size(); ++k) {
    probe[k] = x[k] + h;
    const Scalar up = value(probe);
    probe[k] = x[k] - h;
    const Scalar down = value(probe);
    probe[k] = x[k];
    const Scalar fd = (up - down) / (Scalar(2) * h);
    const Scalar scale =
        std::max({Scalar(1), std::abs(gradient[k]), std::abs(fd)});
    worst = std::max(worst, std::abs(fd - gradient[k]) / scale);
  }
  return worst;
}

template <typename Scalar>
Scalar check_gradient(const ScaleInvariantProblem<Scalar>& problem,
                      const Vector<Scalar>& x, Scalar h) {
  return check_gradient<Scalar>(
      [&](const Vector<Scalar>& y) { return problem.value(y); },
      problem.grad_full(x), x, h);
}

template <typename Scalar>
Scalar check_gradient(const ScaleInvariantProblem<Scalar>& problem,
                      const Vector<Scalar>& x) {
  return check_gradient(problem, x, default_fd_step(x));
}

/// Finite-difference check of a single sample's gradient.
template <typename Scalar>
Scalar check_sample_gradient(const ScaleInvariantProblem<Scalar>& problem, Index l,
                             const Vector<Scalar>& x, Scalar h) {
  return check_gradient<Scalar>(
      [&](const Vector<Scalar>& y) { return problem.value_sample(l, y); },
      problem.grad_sample(l, x), x, h);
}

/// Central differences of grad_full, symmetrized.
template <typename Scalar>
Matrix<Scalar> hessian_fd(const ScaleInvariantProblem<Scalar>& problem,
                          const Vector<Scalar>& x, Scalar h) {
  const Index d = problem.dimension();
  if (d > 50) throw std::invalid_argument("dense Hessian limited to d <= 50");
  if (!(h > 0)) throw std::invalid_argument("finite-difference step must be positive");
  Matrix<Scalar> hess(d, d);
  Vector<Scalar> probe = x;
  for (Index k = 0; k < d; ++k) {
    probe[k] = x[k] + h;
    const Vector<Scalar> up = problem.grad_full(probe);
    probe[k] = x[k] - h;
    const Vector<Scalar> down = problem.grad_full(probe);
    probe[k] = x[k];
    hess.col(k) = (up - down) / (Scalar(2) * h);
  }
  return Scalar(0.5) * (hess + hess.transpose());
}

template <typename Scalar>
struct SpectralDiagnostics {
  Scalar multiplier = 0;               // lambda* = grad f(x*)^T x*
  Vector<Scalar> hessian_eigenvalues;  // ascending
  Scalar eigenvector_residual = 0;     // ||H x* - (x*^T H x*) x*||
  Scalar stationarity_residual = 0;    // ||grad f(x*) - lambda* x*||
  Scalar tangent_radius = 0;           // lambda-bar
  Scalar hessian_norm = 0;             // sigma
  Scalar predicted_rate = 0;           // (lambda-bar / lambda*)^2
  bool local_maximum = false;          // lambda* > lambda-bar
  bool stationary = true;              // both residuals <= 1e-3
};

inline constexpr double kStationarityWarning = 1e-3;

/// Eigen-structure of the finite-difference Hessian at a unit-norm point.
///
/// lambda-bar is the largest absolute eigenvalue of P H P, P = I - x x^T,
/// after dropping the eigenpair aligned with x.
template <typename Scalar>
SpectralDiagnostics<Scalar> spectral_diagnostics(
    const ScaleInvariantProblem<Scalar>& problem, const Vector<Scalar>& x_star) {
  const Index d = problem.dimension();
  const Vector<Scalar> x = x_star / x_star.norm();
  SpectralDiagnostics<Scalar> out;
  const Vector<Scalar> g = problem.grad_full(x);
  out.multiplier = g.dot(x);
  out.stationarity_residual = (g - out.multiplier * x).norm();

  const Matrix<Scalar> hess = hessian_fd(problem, x, default_fd_step(x));
  const Vector<Scalar> hx = hess * x;
  out.eigenvector_residual = (hx - x.dot(hx) * x).norm();

  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> full(hess, Eigen::EigenvaluesOnly);
  out.hessian_eigenvalues = full.eigenvalues();
  out.hessian_norm = out.hessian_eigenvalues.cwiseAbs().maxCoeff();

  const Matrix<Scalar> proj = Matrix<Scalar>::Identity(d, d) - x * x.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> tangent(proj * hess * proj);
  Index aligned = 0;
  (tangent.eigenvectors().transpose() * x).cwiseAbs().maxCoeff(&aligned);
  Scalar radius = 0;
  for (Index i = 0; i < d; ++i) {
    if (i != aligned) radius = std::max(radius, std::abs(tangent.eigenvalues()[i]));
  }
  out.tangent_radius = radius;
  out.predicted_rate = out.multiplier != Scalar(0)
                           ? (radius / out.multiplier) * (radius / out.multiplier)
                           : std::numeric_limits<Scalar>::infinity();
  out.local_maximum = out.multiplier > radius;
  out.stationary = out.eigenvector_residual <= Scalar(kStationarityWarning) &&
                   out.stationarity_residual <= Scalar(kStationarityWarning);
  return out;
}

struct RateFit {
  std::vector<double> gaps;    // 1 - (x_t^T x*)^2
  std::vector<double> ratios;  // gap_{t+1} / gap_t inside the fit window
  double ratio = 0.0;          // geometric mean of the last third of `ratios`
  std::size_t window = 0;      // gaps used (pre-convergence)
};

/// Fits the asymptotic linear rate of a gap sequence. Gaps within 10x of
/// `floor` are excluded as roundoff plateau.
inline RateFit fit_rate_from_gaps(std::vector<double> gaps, double floor = 1e-24) {
  if (gaps.size() < 10) throw std::invalid_argument("rate fit needs >= 10 iterates");
  RateFit fit;
  fit.gaps = std::move(gaps);
  std::size_t window = 0;
  while (window < fit.gaps.size() && fit.gaps[window] > 10.0 * floor) ++window;
  if (window < 4) throw std::invalid_argument("too few pre-convergence iterates");
  fit.window = window;
  for (std::size_t t = 0; t + 1 < window; ++t) {
    fit.ratios.push_back(fit.gaps[t + 1] / fit.gaps[t]);
  }
  const std::size_t tail = std::max<std::size_t>(1, fit.ratios.size() / 3);
  double log_sum = 0.0;
  for (std::size_t t = fit.ratios.size() - tail; t < fit.ratios.size(); ++t) {
    log_sum += std::log(fit.ratios[t]);
  }
  fit.ratio = std::exp(log_sum / static_cast<double>(tail));
  return fit;
}

/// Optimality gap of each iterate against x*, computed as the squared norm of
/// the component orthogonal to x* (equal to 1 - (x^T x*)^2 for unit vectors,
/// without cancellation).
template <typename Scalar>
std::vector<double> optimality_gaps(std::span<const Vector<Scalar>> history,
                                    const Vector<Scalar>& x_star) {
  const Vector<Scalar> ref = x_star / x_star.norm();
  std::vector<double> gaps;
  gaps.reserve(history.size());
  for (const auto& x : history) {
    const Vector<Scalar> u = x / x.norm();
    gaps.push_back(static_cast<double>((u - u.dot(ref) * ref).squaredNorm()));
  }
  return gaps;
}

template <typename Scalar>
RateFit fit_rate(std::span<const Vector<Scalar>> history, const Vector<Scalar>& x_star,
                 double floor = 1e-24) {
  return fit_rate_from_gaps(optimality_gaps(history, x_star), floor);
}

}  // namespace sscipi

#endif  // SSCIPI_VERIFY_HPP
