#include "sscipi/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sscipi {

namespace {

DVector positive_col_sums(const DMatrix& w) {
  DVector c = col_sums(w);
  for (Index k = 0; k < c.size(); ++k) {
    if (!(c[k] > 0.0)) throw ZeroSumError("zero column sum of W", k);
  }
  return c;
}

}  // namespace

DMatrix mu_update_H(const CountMatrix& v, const DMatrix& w, const DMatrix& h) {
  detail::check_factor_shapes(v.rows(), v.cols(), w, h);
  const DVector c = positive_col_sums(w);
  const DMatrix num = full_multiplier(v, w, h);
  return h.cwiseProduct(c.cwiseInverse().asDiagonal() * num);
}

// ---------------------------------------------------------------------------
// CCD

void ccd_refresh(const CountMatrix& v, const DMatrix& w, const DMatrix& h, CcdState& state) {
  state.z.resize(v.nnz());
  for (Index j = 0; j < v.cols(); ++j) {
    for (Index p = v.col_begin(j); p < v.col_end(j); ++p) {
      state.z[p] = w.row(v.csc_row(p)).dot(h.col(j));
    }
  }
  state.valid = true;
  state.sweeps_since_refresh = 0;
}

double ccd_update_H(const CountMatrix& v, const DMatrix& w, CcdState& state, DMatrix& h) {
  detail::check_factor_shapes(v.rows(), v.cols(), w, h);
  if (!state.valid || state.sweeps_since_refresh >= kCcdRefreshPeriod) {
    ccd_refresh(v, w, h, state);
  }
  const DVector c = col_sums(w);
  const Index k_dim = h.rows();
  const Index m_cols = h.cols();
  double work = 0.0;

  auto coordinate = [&](Index k, Index j) {
    double num = c[k];
    double den = 0.0;
    for (Index p = v.col_begin(j); p < v.col_end(j); ++p) {
      const double wik = w(v.csc_row(p), k);
      const double z = std::max(state.z[p], kDenominatorFloor);
      const double ratio = v.csc_value(p) / z;
      num -= wik * ratio;
      den += ratio * wik * wik / z;
    }
    work += static_cast<double>(v.col_nnz(j));
    if (!(den > 0.0) || !std::isfinite(den)) return;
    const double next = std::max(0.0, h(k, j) - num / den);
    const double delta = next - h(k, j);
    if (delta == 0.0) return;
    h(k, j) = next;
    for (Index p = v.col_begin(j); p < v.col_end(j); ++p) {
      state.z[p] += w(v.csc_row(p), k) * delta;
    }
  };

  if (state.shuffled) {
    std::vector<Index> order(static_cast<std::size_t>(k_dim * m_cols));
    std::iota(order.begin(), order.end(), Index{0});
    RngStream rng = RngStream(state.seed).split(0xcd, static_cast<std::uint64_t>(state.sweeps));
    for (std::size_t a = order.size(); a > 1; --a) {
      std::swap(order[a - 1], order[rng.uniform_index(a)]);
    }
    for (Index idx : order) coordinate(idx / m_cols, idx % m_cols);
  } else {
    for (Index k = 0; k < k_dim; ++k) {
      for (Index j = 0; j < m_cols; ++j) coordinate(k, j);
    }
  }
  ++state.sweeps_since_refresh;
  ++state.sweeps;
  return work;
}

// ---------------------------------------------------------------------------
// PGD

DMatrix kl_gradient_H(const CountMatrix& v, const DMatrix& w, const DMatrix& h) {
  detail::check_factor_shapes(v.rows(), v.cols(), w, h);
  const DVector c = col_sums(w);
  return c.replicate(1, h.cols()) - full_multiplier(v, w, h);
}

DMatrix pgd_step(const CountMatrix& v, const DMatrix& w, const DMatrix& h,
                 const DMatrix& alpha) {
  if (alpha.rows() != h.rows() || alpha.cols() != h.cols()) {
    throw ShapeError("step sizes must match H");
  }
  return (h - alpha.cwiseProduct(kl_gradient_H(v, w, h))).cwiseMax(0.0);
}

double pgd_column_objective(const CountMatrix& v, const DMatrix& w, const DVector& c,
                            Index j, const DVector& hj) {
  double phi = c.dot(hj);
  for (Index p = v.col_begin(j); p < v.col_end(j); ++p) {
    const double z = w.row(v.csc_row(p)).dot(hj);
    if (!(z > kDenominatorFloor)) return std::numeric_limits<double>::infinity();
    phi -= v.csc_value(p) * std::log(z);
  }
  return phi;
}

double pgd_update_H(const CountMatrix& v, const DMatrix& w, PgdState& state, DMatrix& h) {
  detail::check_factor_shapes(v.rows(), v.cols(), w, h);
  const Index m_cols = h.cols();
  if (state.step.size() != m_cols) state.step = DVector::Ones(m_cols);
  const DVector c = col_sums(w);
  const DMatrix grad = kl_gradient_H(v, w, h);
  const PgdParams& prm = state.params;
  double work = static_cast<double>(v.nnz());

  for (Index j = 0; j < m_cols; ++j) {
    const DVector g = grad.col(j);
    if (g.isZero(0.0)) continue;
    const DVector hj = h.col(j);
    const double phi0 = pgd_column_objective(v, w, c, j, hj);
    const double col_work = static_cast<double>(v.col_nnz(j));
    work += col_work;
    double alpha = state.step[j];
    bool accepted = false;
    for (int trial = 0; trial <= prm.max_halvings; ++trial) {
      const DVector cand = (hj - alpha * g).cwiseMax(0.0);
      const double phi = pgd_column_objective(v, w, c, j, cand);
      work += col_work;
      const double directional = g.dot(cand - hj);
      if (phi <= phi0 + prm.sufficient_decrease * directional) {
        if (state.keep_log) state.log.push_back({j, alpha, phi0, phi, directional, true});
        h.col(j) = cand;
        state.step[j] = trial == 0 ? alpha * prm.growth : alpha;
        accepted = true;
        break;
      }
      alpha *= prm.shrink;
    }
    if (!accepted) {
      if (state.keep_log) state.log.push_back({j, 0.0, phi0, phi0, 0.0, false});
      state.step[j] = 1.0;
    }
  }
  return work;
}

// ---------------------------------------------------------------------------
// Updaters

void MuUpdater::update_H(const CountMatrix& v, const DMatrix& w, DMatrix& h,
                         UpdateContext& ctx) {
  h = mu_update_H(v, w, h);
  ctx.work += static_cast<double>(v.nnz());
}

void CcdUpdater::update_H(const CountMatrix& v, const DMatrix& w, DMatrix& h,
                          UpdateContext& ctx) {
  CcdState& state = states_[ctx.tag];
  state.shuffled = shuffled_;
  state.seed = seed_ ^ (static_cast<std::uint64_t>(ctx.tag) << 32);
  if (!ctx.continuing) state.valid = false;
  ctx.work += ccd_update_H(v, w, state, h);
}

void PgdUpdater::update_H(const CountMatrix& v, const DMatrix& w, DMatrix& h,
                          UpdateContext& ctx) {
  PgdState& state = states_[ctx.tag];
  state.params = params_;
  ctx.work += pgd_update_H(v, w, state, h);
}

}  // namespace sscipi
