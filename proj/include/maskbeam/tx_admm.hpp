#pragma once

#include <optional>
#include <string>

#include "maskbeam/channel.hpp"
#include "maskbeam/rx_combiner.hpp"
#include "maskbeam/spectral.hpp"
#include "maskbeam/types.hpp"

namespace maskbeam {

/// Per-realization transmit variables of the splitting solver.
///
/// t is the chain-domain signal (n_rf_tx x S); w copies it to the antenna
/// domain (row a mirrors chain m_a); x and q are the time-domain and
/// mask-sample images of w with their own constraint sets; the lambdas are
/// the scaled duals tying the copies together.
struct TxState {
  CxMat t;
  CxMat w;
  CxMat x;
  CxMat q;
  CxMat lambda_q;
  CxMat lambda_x;
  CxMat lambda_w;
  std::vector<std::vector<CxMat>> b_eff;  // [user][subcarrier] n_streams x n_rf_tx
};

struct AdmmReport {
  int iterations = 0;
  bool converged = false;
  double rho = 0.0;
  std::vector<double> residual_q;
  std::vector<double> residual_x;
  std::vector<double> residual_w;
  std::vector<double> objective_trace;
};

struct AdmmOptions {
  double tol_abs = 1e-8;
  double tol_rel = 1e-6;
  double feas_rel = 1e-5;  // constraint slack allowed on the t-implied signal
  int max_iters = 2000;
};

/// Radial clamp of each entry to magnitude sqrt(limits[j]); zeros stay zero.
CxMat project_mask(const CxMat& v, const RealVec& limits_r);

/// Elementwise magnitude clamp to chi with phase kept.
CxMat project_clip(const CxMat& v, double chi);

/// Shared factorization for the antenna-separable w update
/// (eta + 2 rho) I_S + rho A^H A.  With few mask samples (G < S/2) the
/// inversion lemma reduces the work to a G x G factor.
class WSolver {
 public:
  // path: -1 auto, 0 direct S x S, 1 inversion lemma
  WSolver(const CxMat& a_n, double eta_w, double rho, int path = -1);

  /// Solves M_w W = B column-wise for multi-column B (S x n).
  CxMat solve(const CxMat& b) const;
  bool lemma_path() const { return use_lemma_; }

 private:
  CxMat a_n_;
  double upsilon_ = 0.0;
  double rho_ = 0.0;
  bool use_lemma_ = false;
  Eigen::LLT<CxMat> direct_;
  Eigen::LLT<CxMat> inner_;
};

/// Eigendecomposition of the per-subcarrier quadratic term 2 sum_k B^H B,
/// reused across penalty evaluations while bisecting the power multiplier.
struct TEig {
  CxMat u;
  RealVec d;
};

TEig t_eig(const CxMat& quad);

/// Minimizer of the ridge system for a given multiplier mu:
/// (quad + (eta_t + (rho + 2 mu) c) I) t = rhs, c = n_tx/n_rf_tx.
CxVec t_solve_mu(const TEig& eig, const CxVec& rhs, double eta_t, double rho,
                 double c, double mu);

struct PowerSolve {
  CxVec t;
  double mu = 0.0;
  int bisect_iters = 0;
};

/// Ridge solve, then bisection on mu until c ||t||^2 meets the budget within
/// 1e-9 relative whenever the unconstrained solution is infeasible.
PowerSolve t_update_subcarrier(const TEig& eig, const CxVec& rhs, double eta_t,
                               double rho, double c, double p_budget);

/// One full w update (all antennas batched through the shared factorization).
CxMat update_w(const TxState& state, const MaskSpec& mask, const IdftGrid& idft,
               const SystemConfig& cfg, const AntennaMap& map, double rho,
               const WSolver& solver);

/// One full t update (all subcarriers, with per-subcarrier power bisection).
CxMat update_t(const TxState& state, const SystemConfig& cfg,
               const std::vector<CxMat>& symbols_b, const AntennaMap& map,
               double rho);

/// Cyclic splitting solver for one realization's transmit problem.
/// Returns the final state plus an iteration report; converged=false means
/// max_iters was hit before residual and feasibility targets.
std::pair<TxState, AdmmReport> admm_solve(
    const std::vector<std::vector<CxMat>>& b_eff,
    const std::vector<CxMat>& symbols_b, const MaskSpec& mask,
    const IdftGrid& idft, const SystemConfig& cfg, const AntennaMap& map,
    const TxState* warm_start = nullptr, const AdmmOptions& opts = {});

/// Minimum-Frobenius-norm per-user digital precoders reproducing t exactly:
/// V_k = t omega_k^H / sum_j ||omega_j||^2.
std::vector<CxMat> recover_digital_precoders(
    const CxVec& t, const std::vector<CxVec>& symbols_s);

/// B_k^s = U_k^{sH} U_RF,k^H H_k^s V_RF for all users and subcarriers.
std::vector<std::vector<CxMat>> build_effective_channels(
    const ChannelSet& channels, const CxVec& v_ps, const RxState& rx,
    const AntennaMap& map);

/// Dense partially connected RF precoder: column m_a carries v_ps[a] at row a.
CxMat build_v_rf(const CxVec& v_ps, const AntennaMap& map);

/// Rows of the chain-domain signal copied out to their antennas.
CxMat chain_to_antenna(const CxMat& t, const AntennaMap& map);

/// Checks the t-implied antenna signal against power, mask-sample and
/// clipping limits at relative slack rel_tol; optionally reports the worst
/// relative violation (<= 0 when strictly feasible).
bool transmit_feasible(const SystemConfig& cfg, const AntennaMap& map,
                       const MaskSpec& mask, const IdftGrid& idft,
                       const CxMat& t, double rel_tol,
                       double* worst_rel = nullptr);

/// Inner objective sum_{s,k} ||B t - omega||^2 + (eta_w/2)||W||^2
/// + (eta_t/2)||T||^2 at the state's (w, t).
double admm_objective(const TxState& state, const std::vector<CxMat>& symbols_b,
                      const SystemConfig& cfg);

void write_admm_report_csv(const std::string& path, const AdmmReport& report);

}  // namespace maskbeam
