#include "maskbeam/tx_admm.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace maskbeam {

CxMat project_mask(const CxMat& v, const RealVec& limits_r) {
  CxMat out = v;
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    const double cap = std::sqrt(limits_r[j]);
    for (Eigen::Index a = 0; a < out.rows(); ++a) {
      const double mag = std::abs(out(a, j));
      if (mag > cap) out(a, j) *= cap / mag;
    }
  }
  return out;
}

CxMat project_clip(const CxMat& v, double chi) {
  CxMat out = v;
  for (Eigen::Index n = 0; n < out.cols(); ++n)
    for (Eigen::Index a = 0; a < out.rows(); ++a) {
      const double mag = std::abs(out(a, n));
      if (mag > chi) out(a, n) *= chi / mag;
    }
  return out;
}

WSolver::WSolver(const CxMat& a_n, double eta_w, double rho, int path)
    : a_n_(a_n), upsilon_(eta_w + 2.0 * rho), rho_(rho) {
  const Eigen::Index g = a_n.rows();
  const Eigen::Index s = a_n.cols();
  use_lemma_ = (path == 1) || (path == -1 && g > 0 && 2 * g < s);
  if (use_lemma_) {
    CxMat inner = (1.0 / rho_) * CxMat::Identity(g, g);
    inner.noalias() += (1.0 / upsilon_) * (a_n_ * a_n_.adjoint());
    inner_.compute(inner);
    if (inner_.info() != Eigen::Success)
      throw std::runtime_error("w update: inner Gram factorization failed");
  } else {
    CxMat m = upsilon_ * CxMat::Identity(s, s);
    if (g > 0) m.noalias() += rho_ * (a_n_.adjoint() * a_n_);
    direct_.compute(m);
    if (direct_.info() != Eigen::Success)
      throw std::runtime_error("w update: normal-matrix factorization failed");
  }
}

CxMat WSolver::solve(const CxMat& b) const {
  if (!use_lemma_) return direct_.solve(b);
  const CxMat ab = a_n_ * b;
  CxMat out = b / upsilon_;
  out.noalias() -=
      (1.0 / (upsilon_ * upsilon_)) * (a_n_.adjoint() * inner_.solve(ab));
  return out;
}

TEig t_eig(const CxMat& quad) {
  Eigen::SelfAdjointEigenSolver<CxMat> es(quad);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("t update: eigendecomposition failed");
  return {es.eigenvectors(), es.eigenvalues()};
}

CxVec t_solve_mu(const TEig& eig, const CxVec& rhs, double eta_t, double rho,
                 double c, double mu) {
  const CxVec z = eig.u.adjoint() * rhs;
  const double ridge = eta_t + (rho + 2.0 * mu) * c;
  CxVec scaled(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i)
    scaled[i] = z[i] / (eig.d[i] + ridge);
  return eig.u * scaled;
}

namespace {
double power_at_mu(const TEig& eig, const CxVec& z, double eta_t, double rho,
                   double c, double mu) {
  const double ridge = eta_t + (rho + 2.0 * mu) * c;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double den = eig.d[i] + ridge;
    acc += std::norm(z[i]) / (den * den);
  }
  return c * acc;
}
}  // namespace

PowerSolve t_update_subcarrier(const TEig& eig, const CxVec& rhs, double eta_t,
                               double rho, double c, double p_budget) {
  PowerSolve out;
  const CxVec z = eig.u.adjoint() * rhs;
  const double p0 = power_at_mu(eig, z, eta_t, rho, c, 0.0);
  if (p0 <= p_budget) {
    out.mu = 0.0;
    out.t = t_solve_mu(eig, rhs, eta_t, rho, c, 0.0);
    return out;
  }
  double lo = 0.0, hi = 1.0;
  int doublings = 0;
  while (power_at_mu(eig, z, eta_t, rho, c, hi) > p_budget) {
    lo = hi;
    hi *= 2.0;
    if (++doublings > 60)
      throw std::runtime_error("t update: power bracket expansion failed");
  }
  const double tol = 1e-9 * p_budget;
  double mu = hi, pw = 0.0;
  for (int it = 0; it < 400; ++it) {
    mu = 0.5 * (lo + hi);
    pw = power_at_mu(eig, z, eta_t, rho, c, mu);
    ++out.bisect_iters;
    if (std::abs(pw - p_budget) <= tol) break;
    if (pw > p_budget)
      lo = mu;
    else
      hi = mu;
    if (hi - lo <= 1e-16 * std::max(1.0, hi)) break;  // interval exhausted
  }
  out.mu = mu;
  out.t = t_solve_mu(eig, rhs, eta_t, rho, c, mu);
  return out;
}

CxMat chain_to_antenna(const CxMat& t, const AntennaMap& map) {
  CxMat w(Eigen::Index(map.chain_of.size()), t.cols());
  for (Eigen::Index a = 0; a < w.rows(); ++a)
    w.row(a) = t.row(map.chain_of[size_t(a)]);
  return w;
}

bool transmit_feasible(const SystemConfig& cfg, const AntennaMap& map,
                       const MaskSpec& mask, const IdftGrid& idft,
                       const CxMat& t, double rel_tol, double* worst_rel) {
  double worst = 0.0;
  const double c = double(cfg.n_tx) / double(cfg.n_rf_tx);
  for (int s = 0; s < cfg.n_subcarriers; ++s) {
    const double p = c * t.col(s).squaredNorm();
    worst = std::max(worst, p / cfg.power_budget_w[size_t(s)] - 1.0);
  }
  const CxMat w = chain_to_antenna(t, map);
  if (!mask.gammas.empty()) {
    const CxMat a_n = sampling_matrix(mask.gammas, cfg.n_subcarriers,
                                      cfg.oversampling, cfg.cp_len);
    const CxMat spec = w * a_n.transpose();
    for (Eigen::Index j = 0; j < spec.cols(); ++j)
      for (Eigen::Index a = 0; a < spec.rows(); ++a)
        worst = std::max(worst, std::norm(spec(a, j)) / mask.r[j] - 1.0);
  }
  const CxMat time = w * idft.f_herm.transpose();
  for (Eigen::Index n = 0; n < time.cols(); ++n)
    for (Eigen::Index a = 0; a < time.rows(); ++a)
      worst =
          std::max(worst, std::abs(time(a, n)) / cfg.clip_level - 1.0);
  if (worst_rel != nullptr) *worst_rel = worst;
  return worst <= rel_tol;
}

namespace {

CxMat w_rhs(const TxState& state, const IdftGrid& idft, const CxMat& a_n,
            const AntennaMap& map, double rho) {
  // columns = antennas, rows = subcarriers
  CxMat rhs = idft.f_herm.adjoint() *
              (rho * state.x + state.lambda_x).transpose();
  if (a_n.rows() > 0)
    rhs.noalias() +=
        a_n.adjoint() * (rho * state.q + state.lambda_q).transpose();
  const CxMat ts = chain_to_antenna(state.t, map);
  rhs.noalias() += (rho * ts - state.lambda_w).transpose();
  return rhs;
}

}  // namespace

CxMat update_w(const TxState& state, const MaskSpec& mask, const IdftGrid& idft,
               const SystemConfig& cfg, const AntennaMap& map, double rho,
               const WSolver& solver) {
  const CxMat a_n =
      sampling_matrix(mask.gammas, cfg.n_subcarriers, cfg.oversampling,
                      cfg.cp_len);
  return solver.solve(w_rhs(state, idft, a_n, map, rho)).transpose();
}

CxMat update_t(const TxState& state, const SystemConfig& cfg,
               const std::vector<CxMat>& symbols_b, const AntennaMap& map,
               double rho) {
  const int s_count = cfg.n_subcarriers;
  const double c = double(cfg.n_tx) / double(cfg.n_rf_tx);
  const double eta_t = cfg.resolved_reg_t();
  CxMat t(cfg.n_rf_tx, s_count);
  for (int s = 0; s < s_count; ++s) {
    CxMat quad = CxMat::Zero(cfg.n_rf_tx, cfg.n_rf_tx);
    CxVec rhs = CxVec::Zero(cfg.n_rf_tx);
    for (size_t k = 0; k < state.b_eff.size(); ++k) {
      const CxMat& b = state.b_eff[k][size_t(s)];
      quad.noalias() += 2.0 * (b.adjoint() * b);
      rhs.noalias() += 2.0 * (b.adjoint() * symbols_b[k].col(s));
    }
    for (int m = 0; m < cfg.n_rf_tx; ++m)
      for (int a : map.antennas_of[size_t(m)])
        rhs[m] += rho * state.w(a, s) + state.lambda_w(a, s);
    t.col(s) = t_update_subcarrier(t_eig(quad), rhs, eta_t, rho, c,
                                   cfg.power_budget_w[size_t(s)])
                   .t;
  }
  return t;
}

double admm_objective(const TxState& state, const std::vector<CxMat>& symbols_b,
                      const SystemConfig& cfg) {
  double obj = 0.0;
  for (size_t k = 0; k < state.b_eff.size(); ++k)
    for (int s = 0; s < cfg.n_subcarriers; ++s)
      obj += (state.b_eff[k][size_t(s)] * state.t.col(s) -
              symbols_b[k].col(s))
                 .squaredNorm();
  obj += 0.5 * cfg.resolved_reg_w() * state.w.squaredNorm();
  obj += 0.5 * cfg.resolved_reg_t() * state.t.squaredNorm();
  return obj;
}

std::pair<TxState, AdmmReport> admm_solve(
    const std::vector<std::vector<CxMat>>& b_eff,
    const std::vector<CxMat>& symbols_b, const MaskSpec& mask,
    const IdftGrid& idft, const SystemConfig& cfg, const AntennaMap& map,
    const TxState* warm_start, const AdmmOptions& opts) {
  const int s_count = cfg.n_subcarriers;
  const int n_t = cfg.n_tx;
  const int n_rf = cfg.n_rf_tx;
  const int ls = idft.f_herm.rows();
  const Eigen::Index g = Eigen::Index(mask.gammas.size());
  const double c = double(n_t) / double(n_rf);
  const double eta_w = cfg.resolved_reg_w();
  const double eta_t = cfg.resolved_reg_t();

  double norm_acc = 0.0;
  int norm_n = 0;
  for (const auto& per_user : b_eff)
    for (const CxMat& b : per_user) {
      norm_acc += b.squaredNorm();
      ++norm_n;
    }
  const double mean_b = norm_n > 0 ? norm_acc / norm_n : 0.0;
  const double rho = mean_b > 0.0 ? cfg.admm_rho * mean_b : cfg.admm_rho;

  const CxMat a_n = sampling_matrix(mask.gammas, s_count, cfg.oversampling,
                                    cfg.cp_len);
  const WSolver solver(a_n, eta_w, rho);

  // Per-subcarrier quadratic terms are fixed within the solve; factor once.
  std::vector<TEig> eig(static_cast<std::size_t>(s_count));
  std::vector<CxVec> rhs_base(static_cast<std::size_t>(s_count));
  for (int s = 0; s < s_count; ++s) {
    CxMat quad = CxMat::Zero(n_rf, n_rf);
    CxVec base = CxVec::Zero(n_rf);
    for (size_t k = 0; k < b_eff.size(); ++k) {
      const CxMat& b = b_eff[k][size_t(s)];
      quad.noalias() += 2.0 * (b.adjoint() * b);
      base.noalias() += 2.0 * (b.adjoint() * symbols_b[k].col(s));
    }
    eig[size_t(s)] = t_eig(quad);
    rhs_base[size_t(s)] = base;
  }

  TxState st;
  if (warm_start != nullptr && warm_start->t.rows() == n_rf &&
      warm_start->t.cols() == s_count && warm_start->q.cols() == g &&
      warm_start->x.cols() == ls) {
    st = *warm_start;
  } else {
    st.t.resize(n_rf, s_count);
    for (int s = 0; s < s_count; ++s) {
      CxVec mf = 0.5 * rhs_base[size_t(s)];  // matched filter direction
      const double pw = c * mf.squaredNorm();
      if (pw > 0.0)
        mf *= std::sqrt(cfg.power_budget_w[size_t(s)] / pw);
      st.t.col(s) = mf;
    }
    st.w = CxMat::Zero(n_t, s_count);
    st.x = CxMat::Zero(n_t, ls);
    st.q = CxMat::Zero(n_t, g);
    st.lambda_q = CxMat::Zero(n_t, g);
    st.lambda_x = CxMat::Zero(n_t, ls);
    st.lambda_w = CxMat::Zero(n_t, s_count);
  }
  st.b_eff = b_eff;

  AdmmReport report;
  report.rho = rho;

  CxMat aw(n_t, g), xw(n_t, ls);
  aw.noalias() = st.w * a_n.transpose();
  xw.noalias() = st.w * idft.f_herm.transpose();

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    if (g > 0) st.q = project_mask(aw - st.lambda_q / rho, mask.r);
    st.x = project_clip(xw - st.lambda_x / rho, cfg.clip_level);
    st.w = solver.solve(w_rhs(st, idft, a_n, map, rho)).transpose();
    aw.noalias() = st.w * a_n.transpose();
    xw.noalias() = st.w * idft.f_herm.transpose();

    for (int s = 0; s < s_count; ++s) {
      CxVec rhs = rhs_base[size_t(s)];
      for (int m = 0; m < n_rf; ++m)
        for (int a : map.antennas_of[size_t(m)])
          rhs[m] += rho * st.w(a, s) + st.lambda_w(a, s);
      st.t.col(s) = t_update_subcarrier(eig[size_t(s)], rhs, eta_t, rho, c,
                                        cfg.power_budget_w[size_t(s)])
                        .t;
    }

    const CxMat ts = chain_to_antenna(st.t, map);
    st.lambda_q += rho * (st.q - aw);
    st.lambda_x += rho * (st.x - xw);
    st.lambda_w += rho * (st.w - ts);

    const double rq = (st.q - aw).norm();
    const double rx = (st.x - xw).norm();
    const double rw = (st.w - ts).norm();
    report.residual_q.push_back(rq);
    report.residual_x.push_back(rx);
    report.residual_w.push_back(rw);
    report.objective_trace.push_back(admm_objective(st, symbols_b, cfg));
    report.iterations = iter + 1;

    const bool res_ok =
        rq <= opts.tol_abs + opts.tol_rel * std::max(st.q.norm(), aw.norm()) &&
        rx <= opts.tol_abs + opts.tol_rel * std::max(st.x.norm(), xw.norm()) &&
        rw <= opts.tol_abs + opts.tol_rel * std::max(st.w.norm(), ts.norm());
    if (!res_ok) continue;

    // Candidate stop: accept only if the t-implied signal itself is feasible.
    bool feas = true;
    if (g > 0) {
      const CxMat spec = ts * a_n.transpose();
      for (Eigen::Index j = 0; j < g && feas; ++j)
        for (Eigen::Index a = 0; a < spec.rows(); ++a)
          if (std::norm(spec(a, j)) > mask.r[j] * (1.0 + opts.feas_rel)) {
            feas = false;
            break;
          }
    }
    if (feas) {
      const CxMat time = ts * idft.f_herm.transpose();
      const double cap = cfg.clip_level * (1.0 + opts.feas_rel);
      for (Eigen::Index n = 0; n < time.cols() && feas; ++n)
        for (Eigen::Index a = 0; a < time.rows(); ++a)
          if (std::abs(time(a, n)) > cap) {
            feas = false;
            break;
          }
    }
    if (feas) {
      report.converged = true;
      break;
    }
  }
  return {std::move(st), std::move(report)};
}

std::vector<CxMat> recover_digital_precoders(
    const CxVec& t, const std::vector<CxVec>& symbols_s) {
  double denom = 0.0;
  for (const CxVec& w : symbols_s) denom += w.squaredNorm();
  if (!(denom > 0.0))
    throw std::invalid_argument("precoder recovery needs nonzero symbols");
  std::vector<CxMat> v;
  v.reserve(symbols_s.size());
  for (const CxVec& w : symbols_s)
    v.push_back((t * w.adjoint()) / denom);
  return v;
}

CxMat build_v_rf(const CxVec& v_ps, const AntennaMap& map) {
  const int n_t = int(map.chain_of.size());
  const int n_rf = int(map.antennas_of.size());
  CxMat v = CxMat::Zero(n_t, n_rf);
  for (int a = 0; a < n_t; ++a) v(a, map.chain_of[size_t(a)]) = v_ps[a];
  return v;
}

std::vector<std::vector<CxMat>> build_effective_channels(
    const ChannelSet& channels, const CxVec& v_ps, const RxState& rx,
    const AntennaMap& map) {
  const CxMat v_rf = build_v_rf(v_ps, map);
  std::vector<std::vector<CxMat>> b(channels.h.size());
  for (size_t k = 0; k < channels.h.size(); ++k) {
    b[k].resize(channels.h[k].size());
    const CxMat rf_adj = rx.u_rf[k].adjoint();
    for (size_t s = 0; s < channels.h[k].size(); ++s)
      b[k][s] = rx.u_dig[k][s].adjoint() * (rf_adj * channels.h[k][s]) * v_rf;
  }
  return b;
}

void write_admm_report_csv(const std::string& path, const AdmmReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "iteration,residual_q,residual_x,residual_w,objective\n";
  char buf[160];
  for (int i = 0; i < report.iterations; ++i) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g\n", i,
                  report.residual_q[size_t(i)], report.residual_x[size_t(i)],
                  report.residual_w[size_t(i)],
                  report.objective_trace[size_t(i)]);
    out << buf;
  }
}

}  // namespace maskbeam
