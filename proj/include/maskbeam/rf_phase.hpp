#pragma once

#include "maskbeam/channel.hpp"
#include "maskbeam/rx_combiner.hpp"
#include "maskbeam/types.hpp"

namespace maskbeam {

/// Quadratic surrogate for one realization's transmit phase-shifter vector v
/// (length n_tx, unit modulus):
///   f(v) = Re(v^H Q v) - 2 Re(u^H v).
/// Any phase-error averaging is baked into the coefficients at build time, so
/// the same sweep minimizes both the nominal and the robust objective.
struct PsProblem {
  CxMat q_ps;
  CxVec u_ps;
  double sigma_e_rad = 0.0;
};

/// Assembles Q and u from one realization's chain signals t (n_rf_tx x S),
/// the receive state, and that realization's symbols. With tau_a = t(m_a, s)
/// and G_k^s = H^H U_RF U (antenna domain),
///   Q = sum_{s,k} (G G^H) .* (conj(tau) tau^T),
///   u[a] = sum_s conj(tau_a) * (sum_k G_k^s omega_k^s)[a].
/// sigma_e_rad > 0 scales the off-diagonal of Q by e^{-sigma^2} and u by
/// e^{-sigma^2/2}, the averages under iid Gaussian phase errors on v.
PsProblem build_ps_problem(const SystemConfig& cfg, const AntennaMap& map,
                           const ChannelSet& channels, const CxMat& t,
                           const std::vector<CxMat>& symbols_b,
                           const RxState& rx, double sigma_e_rad = 0.0);

double ps_objective(const PsProblem& problem, const CxVec& v);

struct PsSweepOptions {
  int n_sweeps = 5;
  double tol = 1e-10;  // early exit on relative objective decrease
};

/// Cyclic exact coordinate minimization over the entries of v: with
/// y = Q(a,:) v - Q(a,a) v[a] - u[a], the minimizer is v[a] = -y/|y|
/// (entry kept when y == 0). If trace is given, the starting objective is
/// recorded first and then the objective after every entry update.
void ps_coordinate_sweep(const PsProblem& problem, CxVec& v,
                         const PsSweepOptions& opts = {},
                         std::vector<double>* trace = nullptr);

}  // namespace maskbeam
