#include "sscipi/klnmf.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "sscipi/scipi.hpp"

namespace sscipi {

namespace {

constexpr std::uint64_t kInnerTag = 0x1a;
constexpr std::uint64_t kColumnTag = 0x2b;

void check_config(const StochasticConfig& c) {
  if (!(c.step_size > 0.0 && c.step_size <= 1.0)) {
    throw std::invalid_argument("step size must lie in (0, 1]");
  }
  if (!(c.batch_proportion > 0.0 && c.batch_proportion <= 1.0)) {
    throw std::invalid_argument("batch proportion must lie in (0, 1]");
  }
  if (c.epoch_length < 1) throw std::invalid_argument("epoch length must be >= 1");
}

DVector column_sums_checked(const DMatrix& w) {
  DVector c = col_sums(w);
  for (Index k = 0; k < c.size(); ++k) {
    if (!(c[k] > 0.0)) throw ZeroSumError("zero column sum of W", k);
  }
  return c;
}

void renormalize_or_uniform(Eigen::Ref<DVector> y) {
  const double norm = y.norm();
  if (norm > 0.0 && std::isfinite(norm)) {
    y /= norm;
  } else {
    y.setConstant(1.0 / std::sqrt(static_cast<double>(y.size())));
  }
}

}  // namespace

SubproblemBundle build_subproblems(const CountMatrix& v, const DMatrix& w) {
  if (w.rows() != v.rows()) throw ShapeError("W rows must match V rows");
  SubproblemBundle b;
  b.w_col_sums = column_sums_checked(w);
  b.L = w * b.w_col_sums.cwiseInverse().asDiagonal();
  b.v_col_sums = col_sums(v);
  b.Y = DMatrix::Constant(w.cols(), v.cols(),
                          1.0 / std::sqrt(static_cast<double>(w.cols())));
  return b;
}

SubproblemBundle build_subproblems(const CountMatrix& v, const DMatrix& w,
                                   const DMatrix& h) {
  SubproblemBundle b = build_subproblems(v, w);
  if (h.rows() != w.cols() || h.cols() != v.cols()) {
    throw ShapeError("H must be K x M");
  }
  for (Index j = 0; j < h.cols(); ++j) {
    DVector x = b.w_col_sums.cwiseProduct(h.col(j));
    const double s = x.sum();
    if (s > 0.0) b.Y.col(j) = (x / s).cwiseSqrt();
  }
  return b;
}

MixtureProblem<double> column_problem(const SubproblemBundle& bundle,
                                      const CountMatrix& v, Index j,
                                      SamplingMode mode) {
  DVector col = DVector::Zero(v.rows());
  for (Index p = v.col_begin(j); p < v.col_end(j); ++p) col[v.csc_row(p)] = v.csc_value(p);
  return MixtureProblem<double>(bundle.L, std::move(col), mode);
}

DMatrix recover_H(const SubproblemBundle& bundle) {
  const DMatrix x = bundle.Y.cwiseAbs2();
  DMatrix h(x.rows(), x.cols());
  for (Index j = 0; j < x.cols(); ++j) {
    h.col(j) = bundle.v_col_sums[j] * x.col(j).cwiseQuotient(bundle.w_col_sums);
  }
  return h;
}

ClampResult clamp_multiplier(const DVector& g) {
  ClampResult out{g.cwiseMax(0.0), 0};
  out.clamped = (g.array() < 0.0).count();
  return out;
}

Index batch_size_for(double proportion, Index population) {
  if (population <= 0) return 0;
  const auto s = static_cast<Index>(std::llround(proportion * static_cast<double>(population)));
  return std::clamp<Index>(s, 1, population);
}

RngStream round_stream(std::uint64_t seed, FactorTag tag, std::int64_t round,
                       std::int64_t inner) {
  return RngStream(seed)
      .split(static_cast<std::uint64_t>(tag), static_cast<std::uint64_t>(round))
      .split(kInnerTag, static_cast<std::uint64_t>(inner));
}

RngStream column_stream(std::uint64_t seed, FactorTag tag, std::int64_t round,
                        std::int64_t inner, Index j) {
  return round_stream(seed, tag, round, inner).split(kColumnTag, static_cast<std::uint64_t>(j));
}

EpochReport svrg_epoch_all_columns(SubproblemBundle& b, const CountMatrix& v,
                                   const StochasticConfig& cfg, FactorTag tag,
                                   std::int64_t round, std::int64_t inner) {
  check_config(cfg);
  const Index n_rows = v.rows();
  const Index k_dim = b.L.cols();
  const Index m_cols = v.cols();
  if (b.L.rows() != n_rows || b.Y.rows() != k_dim || b.Y.cols() != m_cols) {
    throw ShapeError("subproblem bundle does not match V");
  }
  const double eta = cfg.step_size;
  EpochReport rep;
  const DMatrix lt = b.L.transpose();  // row i of L as a contiguous column

  // Snapshot: unit columns, products at nonzeros, full gradients.
  DMatrix y0 = b.Y;
  for (Index j = 0; j < m_cols; ++j) renormalize_or_uniform(y0.col(j));
  DVector z0 = product_at_nonzeros(b.L, y0.cwiseAbs2(), v);
  for (Index t = 0; t < z0.size(); ++t) z0[t] = std::max(z0[t], kDenominatorFloor);
  DMatrix g0 = DMatrix::Zero(k_dim, m_cols);
  for (Index t = 0; t < v.nnz(); ++t) {
    g0.col(v.col(t)) += (2.0 * v.value(t) / z0[t]) * lt.col(v.row(t));
  }
  g0 = g0.cwiseProduct(y0);
  rep.work += static_cast<double>(v.nnz());

  std::vector<char> active(static_cast<std::size_t>(m_cols), 1);
  for (Index j = 0; j < m_cols; ++j) {
    if (v.col_nnz(j) == 0) {
      active[static_cast<std::size_t>(j)] = 0;
      rep.empty_columns.push_back(j);
    }
  }

  auto advance = [&](Eigen::Ref<DVector> y, DVector g) -> bool {
    if (cfg.clamp) {
      auto c = clamp_multiplier(g);
      rep.clamped += c.clamped;
      g = std::move(c.values);
    }
    DVector next = inner_step<double>(y, g, eta, 0.0);
    const double norm = next.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) return false;
    if (norm < kNormWindowLow || norm > kNormWindowHigh) next /= norm;
    y = next;
    return true;
  };

  DMatrix y = y0;
  if (cfg.mode == SamplingMode::element) {
    for (Index j = 0; j < m_cols; ++j) {
      if (!active[static_cast<std::size_t>(j)]) continue;
      RngStream rng = column_stream(cfg.seed, tag, round, inner, j);
      const Index n_j = v.col_nnz(j);
      const Index s_j = batch_size_for(cfg.batch_proportion, n_j);
      const double n_scale = static_cast<double>(n_j);
      const DVector ys = y0.col(j);
      const DVector gs = g0.col(j);
      DVector yj = ys;
      for (Index t = 0; t < cfg.epoch_length; ++t) {
        const auto alpha = snapshot_alpha<double>(yj, ys, 0.0);
        if (!alpha) {
          ++rep.restarts;
          break;
        }
        const auto batch = sample_rows(n_j, s_j, rng, cfg.replacement);
        const DVector xj = yj.cwiseAbs2();
        DVector acc = DVector::Zero(k_dim);
        for (Index q : batch) {
          const Index p = v.col_begin(j) + q;
          const Index i = v.csc_row(p);
          const double val = v.csc_value(p);
          const double z = std::max(lt.col(i).dot(xj), kDenominatorFloor);
          const double c = 2.0 * n_scale * val / z;
          const double c0 = 2.0 * n_scale * val / z0[v.csc_triplet(p)];
          acc += lt.col(i).cwiseProduct(c * yj - (*alpha * c0) * ys);
        }
        rep.work += 2.0 * static_cast<double>(batch.size());
        if (!advance(yj, *alpha * gs + acc / static_cast<double>(batch.size()))) {
          ++rep.restarts;
          break;
        }
      }
      y.col(j) = yj;
    }
  } else {
    RngStream rng = round_stream(cfg.seed, tag, round, inner);
    const Index s = batch_size_for(cfg.batch_proportion, n_rows);
    const double n_scale = static_cast<double>(n_rows);
    std::vector<char> running = active;
    DVector alphas = DVector::Zero(m_cols);
    for (Index t = 0; t < cfg.epoch_length; ++t) {
      for (Index j = 0; j < m_cols; ++j) {
        if (!running[static_cast<std::size_t>(j)]) continue;
        const auto alpha = snapshot_alpha<double>(y.col(j), y0.col(j), 0.0);
        if (!alpha) {
          running[static_cast<std::size_t>(j)] = 0;
          ++rep.restarts;
        } else {
          alphas[j] = *alpha;
        }
      }
      const auto batch = sample_rows(n_rows, s, rng, cfg.replacement);
      const DMatrix x = y.cwiseAbs2();
      DMatrix acc = DMatrix::Zero(k_dim, m_cols);
      for (Index i : batch) {
        for (Index tt = v.row_begin(i); tt < v.row_end(i); ++tt) {
          const Index j = v.col(tt);
          if (!running[static_cast<std::size_t>(j)]) continue;
          const double val = v.value(tt);
          const double z = std::max(lt.col(i).dot(x.col(j)), kDenominatorFloor);
          const double c = 2.0 * n_scale * val / z;
          const double c0 = 2.0 * n_scale * val / z0[tt];
          acc.col(j) += lt.col(i).cwiseProduct(c * y.col(j) - (alphas[j] * c0) * y0.col(j));
          rep.work += 2.0;
        }
      }
      for (Index j = 0; j < m_cols; ++j) {
        if (!running[static_cast<std::size_t>(j)]) continue;
        DVector g = alphas[j] * g0.col(j) + acc.col(j) / static_cast<double>(batch.size());
        if (!advance(y.col(j), std::move(g))) {
          running[static_cast<std::size_t>(j)] = 0;
          ++rep.restarts;
        }
      }
    }
  }

  for (Index j = 0; j < m_cols; ++j) {
    if (active[static_cast<std::size_t>(j)]) {
      renormalize_or_uniform(y.col(j));
      b.Y.col(j) = y.col(j);
    }
  }
  return rep;
}

VanillaResult vanilla_stochastic_update_H(const CountMatrix& v, const DMatrix& l,
                                          const DMatrix& x, const VanillaBatch& batch,
                                          double eta) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("step size must lie in [0, 1]");
  detail::check_factor_shapes(v.rows(), v.cols(), l, x);
  if (batch.indices.empty()) throw std::invalid_argument("empty batch");
  const Index k_dim = x.rows();
  const Index m_cols = x.cols();
  DMatrix sums = DMatrix::Zero(k_dim, m_cols);
  std::vector<char> touched(static_cast<std::size_t>(m_cols), 0);
  auto add = [&](Index t) {
    const Index i = v.row(t);
    const Index j = v.col(t);
    const double z = std::max(l.row(i).dot(x.col(j)), kDenominatorFloor);
    sums.col(j) += (v.value(t) / z) * l.row(i).transpose();
    touched[static_cast<std::size_t>(j)] = 1;
  };
  double scale = 1.0;
  if (batch.mode == SamplingMode::row) {
    for (Index i : batch.indices) {
      for (Index t = v.row_begin(i); t < v.row_end(i); ++t) add(t);
    }
    scale = static_cast<double>(v.rows()) / static_cast<double>(batch.indices.size());
  } else {
    for (Index t : batch.indices) add(t);
    scale = static_cast<double>(v.nnz()) / static_cast<double>(batch.indices.size());
  }

  const DVector mass = col_sums(v);
  VanillaResult out{x, 0};
  for (Index j = 0; j < m_cols; ++j) {
    if (!touched[static_cast<std::size_t>(j)] || !(mass[j] > 0.0)) continue;
    DVector bracket = (1.0 - eta) + eta * (scale / mass[j]) * sums.col(j).array();
    auto c = clamp_multiplier(bracket);
    out.clamped += c.clamped;
    DVector col = x.col(j).cwiseProduct(c.values.cwiseAbs2());
    const double s = col.sum();
    if (!(s > 0.0)) throw ZeroSumError("column zeroed by clamping", j);
    out.X.col(j) = col / s;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Updaters

namespace {

void finish_update(const SubproblemBundle& bundle, const CountMatrix& v, DMatrix& h) {
  DMatrix next = recover_H(bundle).cwiseMax(kFactorFloor);
  for (Index j = 0; j < v.cols(); ++j) {
    if (v.col_nnz(j) == 0) next.col(j) = h.col(j);
  }
  h = std::move(next);
}

}  // namespace

void StochasticScipiUpdater::update_H(const CountMatrix& v, const DMatrix& w, DMatrix& h,
                                      UpdateContext& ctx) {
  SubproblemBundle bundle = build_subproblems(v, w, h);
  const EpochReport rep =
      svrg_epoch_all_columns(bundle, v, config_, ctx.tag, ctx.round, ctx.inner);
  ctx.work += rep.work;
  ctx.restarts += rep.restarts;
  ctx.clamped += rep.clamped;
  finish_update(bundle, v, h);
}

void FullScipiUpdater::update_H(const CountMatrix& v, const DMatrix& w, DMatrix& h,
                                UpdateContext& ctx) {
  SubproblemBundle bundle = build_subproblems(v, w, h);
  const DMatrix x = bundle.Y.cwiseAbs2();
  const DMatrix mult = full_multiplier(v, bundle.L, x);
  DMatrix next = x.cwiseProduct(mult.cwiseAbs2());
  for (Index j = 0; j < next.cols(); ++j) {
    const double s = next.col(j).sum();
    if (s > 0.0 && std::isfinite(s)) {
      bundle.Y.col(j) = (next.col(j) / s).cwiseSqrt();
    }
  }
  ctx.work += static_cast<double>(v.nnz());
  finish_update(bundle, v, h);
}

void VanillaStochasticUpdater::update_H(const CountMatrix& v, const DMatrix& w, DMatrix& h,
                                        UpdateContext& ctx) {
  check_config(config_);
  if (v.nnz() == 0) return;
  SubproblemBundle bundle = build_subproblems(v, w, h);
  RngStream rng = round_stream(config_.seed, ctx.tag, ctx.round, ctx.inner);
  VanillaBatch batch{config_.mode, {}};
  if (config_.mode == SamplingMode::row) {
    batch.indices = sample_rows(v.rows(), batch_size_for(config_.batch_proportion, v.rows()),
                                rng, config_.replacement);
    for (Index i : batch.indices) ctx.work += static_cast<double>(v.row_end(i) - v.row_begin(i));
  } else {
    batch.indices = sample_nonzeros(v, batch_size_for(config_.batch_proportion, v.nnz()),
                                    rng, config_.replacement);
    ctx.work += static_cast<double>(batch.indices.size());
  }
  const VanillaResult res =
      vanilla_stochastic_update_H(v, bundle.L, bundle.Y.cwiseAbs2(), batch, config_.step_size);
  ctx.clamped += res.clamped;
  bundle.Y = res.X.cwiseSqrt();
  finish_update(bundle, v, h);
}

SamplingMode default_sampling_mode(const CountMatrix& v) {
  return v.density() < 0.5 ? SamplingMode::element : SamplingMode::row;
}

void update_W(const CountMatrix& v_transposed, FactorPair& model, FactorUpdater& updater,
              UpdateContext& ctx) {
  DMatrix wt = model.W.transpose();
  const DMatrix ht = model.H.transpose();
  updater.update_H(v_transposed, ht, wt, ctx);
  model.W = wt.transpose();
}

void stabilize(FactorPair& model) {
  for (Index k = 0; k < model.W.cols(); ++k) {
    if (!(model.W.col(k).maxCoeff() > 0.0)) model.W.col(k).setConstant(kFactorFloor);
  }
  for (Index k = 0; k < model.H.rows(); ++k) {
    if (!(model.H.row(k).maxCoeff() > 0.0)) model.H.row(k).setConstant(kFactorFloor);
  }
}

// ---------------------------------------------------------------------------
// Alternating minimization

namespace {

double objective(const CountMatrix& v, const FactorPair& m, int repeats) {
  double value = kl_divergence(v, m.W, m.H);
  for (int r = 1; r < repeats; ++r) {
    const double again = kl_divergence(v, m.W, m.H);
    if (again != value) value = std::min(value, again);
  }
  return value;
}

bool over_budget(const Budget& b, const Stopwatch& watch, double work) {
  if (b.max_seconds && watch.seconds() >= *b.max_seconds) return true;
  if (b.max_work && work >= *b.max_work) return true;
  return false;
}

}  // namespace

AlternateResult alternate(const CountMatrix& v, FactorPair model, FactorUpdater& h_solver,
                          FactorUpdater& w_solver, const AlternateOptions& options) {
  detail::check_factor_shapes(v.rows(), v.cols(), model.W, model.H);
  if (options.budget.max_rounds < 0) throw std::invalid_argument("negative round budget");
  AlternateResult res;
  res.model = std::move(model);
  res.trace.solver = options.solver_name.empty() ? h_solver.name() : options.solver_name;
  res.trace.seed = options.seed;
  const CountMatrix vt = v.transposed();
  const int repeats = std::max(1, options.objective_repeats);

  Stopwatch watch;
  double work = 0.0;
  double current = objective(v, res.model, repeats);
  res.trace.records.push_back({0.0, 0, 0.0, current});
  watch.start();

  auto run_half = [&](FactorTag tag, std::int64_t round) {
    FactorUpdater& solver = tag == FactorTag::H ? h_solver : w_solver;
    UpdateContext ctx;
    ctx.tag = tag;
    ctx.round = round;
    auto step = [&] {
      if (tag == FactorTag::H) {
        solver.update_H(v, res.model.W, res.model.H, ctx);
      } else {
        update_W(vt, res.model, solver, ctx);
      }
      stabilize(res.model);
    };
    if (options.scheme == Scheme::one_step) {
      step();
    } else {
      double previous = current;
      for (Index it = 0; it < options.exact_inner_cap; ++it) {
        ctx.inner = it;
        ctx.continuing = it > 0;
        step();
        ++res.inner_iterations;
        double value;
        {
          PausedScope pause(watch);
          value = objective(v, res.model, repeats);
        }
        if (std::abs(previous - value) <
            options.exact_tolerance * std::max(1.0, std::abs(value))) {
          break;
        }
        previous = value;
        if (over_budget(options.budget, watch, work + ctx.work)) break;
      }
    }
    work += ctx.work;
    res.restarts += ctx.restarts;
    res.clamped += ctx.clamped;
  };

  for (std::int64_t round = 1; round <= options.budget.max_rounds; ++round) {
    run_half(FactorTag::H, round);
    run_half(FactorTag::W, round);
    {
      PausedScope pause(watch);
      current = objective(v, res.model, repeats);
      res.trace.records.push_back({watch.seconds(), round, work, current});
    }
    if (!std::isfinite(current)) break;
    if (over_budget(options.budget, watch, work)) break;
  }
  return res;
}

}  // namespace sscipi
