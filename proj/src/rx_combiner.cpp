#include "maskbeam/rx_combiner.hpp"

#include <stdexcept>

namespace maskbeam {

RxState init_rx_state(const SystemConfig& cfg,
                      const std::vector<Eigen::MatrixXi>& connectivity) {
  RxState rx;
  if (connectivity.empty()) {
    rx.connectivity.assign(size_t(cfg.n_users),
                           Eigen::MatrixXi::Ones(cfg.n_rx, cfg.n_rf_rx));
  } else {
    if (connectivity.size() != size_t(cfg.n_users))
      throw std::invalid_argument("connectivity: one support per user");
    for (const auto& c : connectivity)
      if (c.rows() != cfg.n_rx || c.cols() != cfg.n_rf_rx)
        throw std::invalid_argument("connectivity: support must be n_rx x n_rf_rx");
    rx.connectivity = connectivity;
  }
  rx.u_rf.resize(size_t(cfg.n_users));
  for (int k = 0; k < cfg.n_users; ++k)
    rx.u_rf[size_t(k)] =
        rx.connectivity[size_t(k)].cast<double>().cast<cxd>();
  rx.u_dig.assign(
      size_t(cfg.n_users),
      std::vector<CxMat>(size_t(cfg.n_subcarriers),
                         CxMat::Identity(cfg.n_rf_rx, cfg.n_streams)));
  return rx;
}

namespace {
// Antenna-domain transmit vector of realization b at subcarrier s.
CxVec antenna_signal(const CxVec& v_ps, const AntennaMap& map, const CxMat& t,
                     int s) {
  CxVec x(Eigen::Index(map.chain_of.size()));
  for (Eigen::Index a = 0; a < x.size(); ++a)
    x[a] = v_ps[a] * t(map.chain_of[size_t(a)], s);
  return x;
}
}  // namespace

TxAverages tx_sample_averages(const SystemConfig& cfg, const AntennaMap& map,
                              const std::vector<CxMat>& t_per_b,
                              const std::vector<CxVec>& v_ps_per_b,
                              const std::vector<std::vector<CxMat>>& symbols) {
  const int s_count = cfg.n_subcarriers;
  const size_t batch = t_per_b.size();
  TxAverages avg;
  avg.r_tt.assign(size_t(s_count), CxMat::Zero(cfg.n_tx, cfg.n_tx));
  avg.r_tw.assign(size_t(cfg.n_users),
                  std::vector<CxMat>(size_t(s_count),
                                     CxMat::Zero(cfg.n_tx, cfg.n_streams)));
  avg.sym_energy = RealMat::Zero(cfg.n_users, s_count);

  for (size_t b = 0; b < batch; ++b)
    for (int s = 0; s < s_count; ++s) {
      const CxVec x = antenna_signal(v_ps_per_b[b], map, t_per_b[b], s);
      avg.r_tt[size_t(s)].noalias() += x * x.adjoint();
      for (int k = 0; k < cfg.n_users; ++k) {
        const auto w = symbols[b][size_t(k)].col(s);
        avg.r_tw[size_t(k)][size_t(s)].noalias() += x * w.adjoint();
        avg.sym_energy(k, s) += w.squaredNorm();
      }
    }
  const double inv = 1.0 / double(batch);
  for (auto& m : avg.r_tt) m *= inv;
  for (auto& per_user : avg.r_tw)
    for (auto& m : per_user) m *= inv;
  avg.sym_energy *= inv;
  return avg;
}

std::vector<std::vector<CxMat>> mmse_digital_combiner(
    const SystemConfig& cfg, const AntennaMap& map, const ChannelSet& channels,
    const std::vector<CxMat>& t_per_b, const std::vector<CxVec>& v_ps_per_b,
    const std::vector<std::vector<CxMat>>& symbols,
    const std::vector<CxMat>& u_rf) {
  const size_t batch = t_per_b.size();
  const double inv = 1.0 / double(batch);
  std::vector<std::vector<CxMat>> u_dig(size_t(cfg.n_users));
  for (int k = 0; k < cfg.n_users; ++k) {
    u_dig[size_t(k)].resize(size_t(cfg.n_subcarriers));
    const CxMat gram = u_rf[size_t(k)].adjoint() * u_rf[size_t(k)];
    for (int s = 0; s < cfg.n_subcarriers; ++s) {
      CxMat m = channels.noise_var(k, s) * gram;
      CxMat n = CxMat::Zero(cfg.n_rf_rx, cfg.n_streams);
      for (size_t b = 0; b < batch; ++b) {
        const CxVec x = antenna_signal(v_ps_per_b[b], map, t_per_b[b], s);
        const CxVec z =
            u_rf[size_t(k)].adjoint() * (channels.h[size_t(k)][size_t(s)] * x);
        m.noalias() += inv * (z * z.adjoint());
        n.noalias() += inv * (z * symbols[b][size_t(k)].col(s).adjoint());
      }
      // Least-norm solve tolerates the rank-deficient all-ones start.
      u_dig[size_t(k)][size_t(s)] =
          m.completeOrthogonalDecomposition().solve(n);
    }
  }
  return u_dig;
}

namespace {

struct UserSweepCache {
  std::vector<CxMat> d_bar;     // per s: H R_tt H^H + sigma^2 I
  std::vector<CxMat> gram_dig;  // per s: U U^H
  CxMat beta1;                  // sum_s H R_tw U^H
};

UserSweepCache build_cache(const SystemConfig& cfg, const ChannelSet& channels,
                           const TxAverages& avg,
                           const std::vector<std::vector<CxMat>>& u_dig,
                           int k) {
  UserSweepCache cache;
  cache.d_bar.resize(size_t(cfg.n_subcarriers));
  cache.gram_dig.resize(size_t(cfg.n_subcarriers));
  cache.beta1 = CxMat::Zero(cfg.n_rx, cfg.n_rf_rx);
  for (int s = 0; s < cfg.n_subcarriers; ++s) {
    const CxMat& h = channels.h[size_t(k)][size_t(s)];
    cache.d_bar[size_t(s)] =
        h * avg.r_tt[size_t(s)] * h.adjoint() +
        channels.noise_var(k, s) * CxMat::Identity(cfg.n_rx, cfg.n_rx);
    const CxMat& u = u_dig[size_t(k)][size_t(s)];
    cache.gram_dig[size_t(s)] = u * u.adjoint();
    cache.beta1.noalias() +=
        h * avg.r_tw[size_t(k)][size_t(s)] * u.adjoint();
  }
  return cache;
}

// beta2 for entry (a,m) with that entry taken out of u_rf.
cxd beta2_masked(const UserSweepCache& cache, const CxMat& u_rf, int a, int m,
                 int s_count) {
  cxd acc = 0.0;
  for (int s = 0; s < s_count; ++s) {
    const CxMat& d = cache.d_bar[size_t(s)];
    const CxMat& g = cache.gram_dig[size_t(s)];
    const CxVec col = u_rf * g.col(m);
    acc += (d.row(a) * col)(0, 0) - u_rf(a, m) * d(a, a) * g(m, m);
  }
  return acc;
}

}  // namespace

std::pair<cxd, cxd> analog_combiner_betas(
    const SystemConfig& cfg, const ChannelSet& channels, const TxAverages& avg,
    const std::vector<std::vector<CxMat>>& u_dig, const CxMat& u_rf_masked,
    int user, int a, int m) {
  const UserSweepCache cache = build_cache(cfg, channels, avg, u_dig, user);
  const cxd b1 = cache.beta1(a, m);
  // The masked matrix already has (a,m) zeroed, so the own-term is zero.
  cxd b2 = 0.0;
  for (int s = 0; s < cfg.n_subcarriers; ++s) {
    const CxVec col = u_rf_masked * cache.gram_dig[size_t(s)].col(m);
    b2 += (cache.d_bar[size_t(s)].row(a) * col)(0, 0);
  }
  return {b1, b2};
}

double combiner_user_cost(const SystemConfig& cfg, const ChannelSet& channels,
                          const TxAverages& avg,
                          const std::vector<std::vector<CxMat>>& u_dig,
                          const std::vector<CxMat>& u_rf, int user) {
  double cost = 0.0;
  const CxMat& urf = u_rf[size_t(user)];
  for (int s = 0; s < cfg.n_subcarriers; ++s) {
    const CxMat& h = channels.h[size_t(user)][size_t(s)];
    const CxMat& u = u_dig[size_t(user)][size_t(s)];
    const CxMat d_bar =
        h * avg.r_tt[size_t(s)] * h.adjoint() +
        channels.noise_var(user, s) * CxMat::Identity(cfg.n_rx, cfg.n_rx);
    const CxMat ruf = urf * u;  // n_rx x n_streams
    cost += (ruf.adjoint() * d_bar * ruf).trace().real();
    const CxMat cross = h * avg.r_tw[size_t(user)][size_t(s)];
    cost -= 2.0 * ruf.conjugate().cwiseProduct(cross).sum().real();
    cost += avg.sym_energy(user, s);
  }
  return cost;
}

void analog_combiner_sweep(const SystemConfig& cfg, const ChannelSet& channels,
                           const TxAverages& avg,
                           const std::vector<std::vector<CxMat>>& u_dig,
                           std::vector<CxMat>& u_rf,
                           const std::vector<Eigen::MatrixXi>& connectivity,
                           const CombinerSweepOptions& opts,
                           std::vector<double>* trace) {
  const double fade = std::exp(-0.5 * opts.sigma_e * opts.sigma_e);
  if (trace != nullptr) {
    double total = 0.0;
    for (int kk = 0; kk < cfg.n_users; ++kk)
      total += combiner_user_cost(cfg, channels, avg, u_dig, u_rf, kk);
    trace->push_back(total);
  }
  for (int k = 0; k < cfg.n_users; ++k) {
    const UserSweepCache cache = build_cache(cfg, channels, avg, u_dig, k);
    const Eigen::MatrixXi& support = connectivity[size_t(k)];
    CxMat& urf = u_rf[size_t(k)];
    double prev = combiner_user_cost(cfg, channels, avg, u_dig, u_rf, k);
    for (int sweep = 0; sweep < opts.n_sweeps; ++sweep) {
      for (int a = 0; a < cfg.n_rx; ++a)
        for (int m = 0; m < cfg.n_rf_rx; ++m) {
          if (support(a, m) == 0) continue;
          const cxd b2 = beta2_masked(cache, urf, a, m, cfg.n_subcarriers);
          const cxd y = fade * b2 - cache.beta1(a, m);
          const double mag = std::abs(y);
          if (mag > 0.0) urf(a, m) = -y / mag;
          if (trace != nullptr) {
            double total = 0.0;
            for (int kk = 0; kk < cfg.n_users; ++kk)
              total += combiner_user_cost(cfg, channels, avg, u_dig, u_rf, kk);
            trace->push_back(total);
          }
        }
      const double cost = combiner_user_cost(cfg, channels, avg, u_dig, u_rf, k);
      if (prev - cost <= opts.tol * std::abs(prev)) break;
      prev = cost;
    }
  }
}

}  // namespace maskbeam
