#ifndef SSCIPI_BASELINES_HPP
#define SSCIPI_BASELINES_HPP

#include <map>
#include <string>
#include <vector>

#include "sscipi/klnmf.hpp"

namespace sscipi {

// Multiplicative update (EM for mixture proportions).

/// H'_kj = H_kj (sum_i W_ik V_ij / Z_ij) / (sum_i W_ik).
DMatrix mu_update_H(const CountMatrix& v, const DMatrix& w, const DMatrix& h);

// Cyclic coordinate descent.

/// WH kept at the nonzeros of V (CSC order) across coordinate updates.
struct CcdState {
  DVector z;  // (WH)_ij at CSC position p
  bool valid = false;
  int sweeps_since_refresh = 0;
  bool shuffled = false;  // random coordinate order instead of k-major
  std::uint64_t seed = 0;
  std::int64_t sweeps = 0;
};

/// Full recomputation of Z after this many incremental sweeps.
inline constexpr int kCcdRefreshPeriod = 50;

void ccd_refresh(const CountMatrix& v, const DMatrix& w, const DMatrix& h, CcdState& state);

/// One sweep of Newton coordinate steps, k-major then j, both ascending:
/// H_kj <- max{0, H_kj - sum_i W_ik (1 - V_ij/Z_ij) / sum_i V_ij W_ik^2 / Z_ij^2}.
/// Coordinates with zero curvature are skipped. Returns work (terms touched).
double ccd_update_H(const CountMatrix& v, const DMatrix& w, CcdState& state, DMatrix& h);

// Projected gradient descent.

struct PgdParams {
  double shrink = 0.5;
  double sufficient_decrease = 1e-4;
  double growth = 2.0;
  int max_halvings = 60;
};

struct PgdLineSearch {
  Index column = 0;
  double alpha = 0.0;
  double phi_before = 0.0;
  double phi_after = 0.0;
  double directional = 0.0;  // g^T (h' - h)
  bool accepted = false;
};

struct PgdState {
  DVector step;  // alpha_j per column, warm-started
  PgdParams params;
  bool keep_log = false;
  std::vector<PgdLineSearch> log;
};

/// Gradient of the KL objective in H: (sum_i W_ik) - W^T [V / Z].
DMatrix kl_gradient_H(const CountMatrix& v, const DMatrix& w, const DMatrix& h);

/// max{0, H - alpha .* G} with elementwise steps.
DMatrix pgd_step(const CountMatrix& v, const DMatrix& w, const DMatrix& h,
                 const DMatrix& alpha);

/// Column objective sum_k c_k h_k - sum_i V_ij log (W h)_i.
double pgd_column_objective(const CountMatrix& v, const DMatrix& w, const DVector& c,
                            Index j, const DVector& hj);

/// One projected step per column with an Armijo backtracking search on the
/// column's step size. Returns work (terms touched).
double pgd_update_H(const CountMatrix& v, const DMatrix& w, PgdState& state, DMatrix& h);

// Updaters behind the shared solver interface.

class MuUpdater final : public FactorUpdater {
 public:
  std::string name() const override { return "mu"; }
  void update_H(const CountMatrix& v, const DMatrix& w, DMatrix& h,
                UpdateContext& ctx) override;
};

class CcdUpdater final : public FactorUpdater {
 public:
  explicit CcdUpdater(bool shuffled = false, std::uint64_t seed = 0)
      : shuffled_(shuffled), seed_(seed) {}
  std::string name() const override { return shuffled_ ? "scd" : "ccd"; }
  void update_H(const CountMatrix& v, const DMatrix& w, DMatrix& h,
                UpdateContext& ctx) override;

 private:
  bool shuffled_;
  std::uint64_t seed_;
  std::map<FactorTag, CcdState> states_;
};

class PgdUpdater final : public FactorUpdater {
 public:
  explicit PgdUpdater(PgdParams params = {}) : params_(params) {}
  std::string name() const override { return "pgd"; }
  void update_H(const CountMatrix& v, const DMatrix& w, DMatrix& h,
                UpdateContext& ctx) override;

 private:
  PgdParams params_;
  std::map<FactorTag, PgdState> states_;
};

}  // namespace sscipi

#endif  // SSCIPI_BASELINES_HPP
