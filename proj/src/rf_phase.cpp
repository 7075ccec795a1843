#include "maskbeam/rf_phase.hpp"

#include <cmath>

namespace maskbeam {

PsProblem build_ps_problem(const SystemConfig& cfg, const AntennaMap& map,
                           const ChannelSet& channels, const CxMat& t,
                           const std::vector<CxMat>& symbols_b,
                           const RxState& rx, double sigma_e_rad) {
  PsProblem p;
  p.sigma_e_rad = sigma_e_rad;
  p.q_ps = CxMat::Zero(cfg.n_tx, cfg.n_tx);
  p.u_ps = CxVec::Zero(cfg.n_tx);

  CxVec tau(cfg.n_tx);
  for (int s = 0; s < cfg.n_subcarriers; ++s) {
    for (Eigen::Index a = 0; a < tau.size(); ++a)
      tau[a] = t(map.chain_of[size_t(a)], s);
    const CxMat tau_outer = tau.conjugate() * tau.transpose();
    for (int k = 0; k < cfg.n_users; ++k) {
      const CxMat g = channels.h[size_t(k)][size_t(s)].adjoint() *
                      (rx.u_rf[size_t(k)] * rx.u_dig[size_t(k)][size_t(s)]);
      p.q_ps.noalias() += (g * g.adjoint()).cwiseProduct(tau_outer);
      p.u_ps += tau.conjugate().cwiseProduct(
          g * symbols_b[size_t(k)].col(s));
    }
  }
  p.q_ps = 0.5 * (p.q_ps + p.q_ps.adjoint()).eval();

  // Phase-error averaging: off-diagonal couplings decay as e^{-sigma^2},
  // the linear term as e^{-sigma^2/2}; both factors are exactly 1 at
  // sigma = 0, so the nominal problem falls out bit-identically.
  const double off = std::exp(-sigma_e_rad * sigma_e_rad);
  const double lin = std::exp(-0.5 * sigma_e_rad * sigma_e_rad);
  for (Eigen::Index i = 0; i < p.q_ps.rows(); ++i)
    for (Eigen::Index j = 0; j < p.q_ps.cols(); ++j)
      if (i != j) p.q_ps(i, j) *= off;
  p.u_ps *= lin;
  return p;
}

double ps_objective(const PsProblem& problem, const CxVec& v) {
  const cxd quad = v.dot(problem.q_ps * v);  // v^H Q v
  return quad.real() - 2.0 * problem.u_ps.dot(v).real();
}

void ps_coordinate_sweep(const PsProblem& problem, CxVec& v,
                         const PsSweepOptions& opts,
                         std::vector<double>* trace) {
  const Eigen::Index n = v.size();
  double prev = ps_objective(problem, v);
  if (trace != nullptr) trace->push_back(prev);
  for (int sweep = 0; sweep < opts.n_sweeps; ++sweep) {
    for (Eigen::Index a = 0; a < n; ++a) {
      const cxd y = (problem.q_ps.row(a) * v)(0, 0) -
                    problem.q_ps(a, a) * v[a] - problem.u_ps[a];
      const double mag = std::abs(y);
      if (mag > 0.0) v[a] = -y / mag;
      if (trace != nullptr) trace->push_back(ps_objective(problem, v));
    }
    const double cost = ps_objective(problem, v);
    if (prev - cost <= opts.tol * std::abs(prev)) break;
    prev = cost;
  }
}

}  // namespace maskbeam
