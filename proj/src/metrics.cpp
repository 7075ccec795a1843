#include "maskbeam/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace maskbeam {

RealVec per_subcarrier_mse(const SystemConfig& cfg, const ChannelSet& channels,
                           const AntennaMap& map,
                           const std::vector<CxMat>& t_per_b,
                           const std::vector<CxVec>& v_ps_per_b,
                           const RxState& rx,
                           const std::vector<std::vector<CxMat>>& symbols) {
  return user_subcarrier_mse(cfg, channels, map, t_per_b, v_ps_per_b, rx,
                             symbols)
      .colwise()
      .sum()
      .transpose();
}

RealMat evm(const SystemConfig& cfg, const ChannelSet& channels,
            const AntennaMap& map, const std::vector<CxMat>& t_per_b,
            const std::vector<CxVec>& v_ps_per_b, const RxState& rx,
            const std::vector<std::vector<CxMat>>& symbols) {
  RealMat mse = user_subcarrier_mse(cfg, channels, map, t_per_b, v_ps_per_b,
                                    rx, symbols);
  return (mse / double(cfg.n_streams)).cwiseMax(0.0).cwiseSqrt();
}

RealVec symbol_error_rate(const SystemConfig& cfg, const ChannelSet& channels,
                          const AntennaMap& map,
                          const std::vector<CxMat>& t_per_b,
                          const std::vector<CxVec>& v_ps_per_b,
                          const RxState& rx, const SymbolBatch& batch,
                          const Constellation& constellation,
                          int n_noise_draws, Rng& rng) {
  if (n_noise_draws < 1)
    throw std::invalid_argument("symbol_error_rate: n_noise_draws >= 1");
  const size_t n_b = t_per_b.size();
  RealVec errors = RealVec::Zero(cfg.n_subcarriers);
  CxVec noise(cfg.n_rx);
  for (size_t b = 0; b < n_b; ++b)
    for (int k = 0; k < cfg.n_users; ++k) {
      const CxMat rx_chain =
          (rx.u_rf[size_t(k)]).adjoint();  // n_rf_rx x n_rx
      for (int s = 0; s < cfg.n_subcarriers; ++s) {
        CxVec x(cfg.n_tx);
        for (int a = 0; a < cfg.n_tx; ++a)
          x[a] = v_ps_per_b[b][a] * t_per_b[b](map.chain_of[size_t(a)], s);
        const CxVec y_det = channels.h[size_t(k)][size_t(s)] * x;
        const CxMat dec =
            rx.u_dig[size_t(k)][size_t(s)].adjoint() * rx_chain;
        const double sigma = std::sqrt(channels.noise_var(k, s));
        for (int draw = 0; draw < n_noise_draws; ++draw) {
          for (int r = 0; r < cfg.n_rx; ++r) noise[r] = sigma * rng.cnormal();
          const CxVec shat = dec * (y_det + noise);
          for (int j = 0; j < cfg.n_streams; ++j)
            if (qam_decide(constellation, shat[j]) !=
                batch.idx[b][size_t(k)](j, s))
              errors[s] += 1.0;
        }
      }
    }
  const double total =
      double(n_b) * cfg.n_users * cfg.n_streams * n_noise_draws;
  return errors / total;
}

std::vector<CxMat> antenna_domain(const AntennaMap& map,
                                  const std::vector<CxMat>& t_per_b,
                                  const std::vector<CxVec>& v_ps_per_b) {
  std::vector<CxMat> w;
  w.reserve(t_per_b.size());
  for (size_t b = 0; b < t_per_b.size(); ++b) {
    const Eigen::Index n_tx = v_ps_per_b[b].size();
    CxMat wb(n_tx, t_per_b[b].cols());
    for (Eigen::Index a = 0; a < n_tx; ++a)
      wb.row(a) = v_ps_per_b[b][a] * t_per_b[b].row(map.chain_of[size_t(a)]);
    w.push_back(std::move(wb));
  }
  return w;
}

namespace {

// Trapezoid of summed antenna PSD over grid points with f in [lo, hi].
double band_power_w(const RealVec& freq_hz, const RealVec& total_psd,
                    double lo, double hi) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i + 1 < freq_hz.size(); ++i) {
    if (freq_hz[i] < lo || freq_hz[i + 1] > hi) continue;
    acc += 0.5 * (total_psd[i] + total_psd[i + 1]) *
           (freq_hz[i + 1] - freq_hz[i]);
  }
  return acc;
}

}  // namespace

EmissionReport emission_report(const SystemConfig& cfg,
                               const std::vector<CxMat>& w_per_b,
                               const MaskSpec& mask, int points_per_bin) {
  EmissionReport rep;
  rep.gammas = dense_gamma_grid(cfg, points_per_bin);
  const Eigen::Index n_grid = Eigen::Index(rep.gammas.size());
  rep.freq_hz.resize(n_grid);
  for (Eigen::Index i = 0; i < n_grid; ++i)
    rep.freq_hz[i] = gamma_to_freq_hz(cfg, rep.gammas[i]);

  const CxMat a_dense = sampling_matrix(rep.gammas, cfg.n_subcarriers,
                                        cfg.oversampling, cfg.cp_len);
  const CxMat a_mask = sampling_matrix(mask.gammas, cfg.n_subcarriers,
                                       cfg.oversampling, cfg.cp_len);

  rep.psd_w_hz = RealMat::Zero(cfg.n_tx, n_grid);
  double margin = std::numeric_limits<double>::infinity();
  for (const CxMat& w : w_per_b) {
    rep.psd_w_hz += psd_from_spectrum(spectrum_samples(a_dense, w), cfg);
    const CxMat spec = spectrum_samples(a_mask, w);
    for (Eigen::Index j = 0; j < spec.cols(); ++j)
      for (Eigen::Index a = 0; a < spec.rows(); ++a) {
        const double meas = std::max(std::norm(spec(a, j)), 1e-300);
        margin = std::min(margin, 10.0 * std::log10(mask.r[j] / meas));
      }
  }
  if (!w_per_b.empty()) rep.psd_w_hz /= double(w_per_b.size());
  rep.worst_mask_margin_db = margin;

  const RealVec total = rep.psd_w_hz.colwise().sum().transpose();
  const double half_bw = 0.5 * cfg.bandwidth_hz;
  const double inband_w = band_power_w(rep.freq_hz, total, -half_bw, half_bw);
  const double oob_w =
      band_power_w(rep.freq_hz, total, mask.enforce_lo_hz,
                   mask.enforce_hi_hz) +
      band_power_w(rep.freq_hz, total, -mask.enforce_hi_hz,
                   -mask.enforce_lo_hz);
  rep.inband_dbm = watts_to_dbm(inband_w);
  rep.oob_dbm = watts_to_dbm(oob_w);
  return rep;
}

namespace {

// Effective per-user channels through all-ones RF stages, reduced to
// n_streams dominant receive directions, stacked over users.
std::vector<CxMat> stacked_effective(const SystemConfig& cfg,
                                     const ChannelSet& channels) {
  const AntennaMap map = make_antenna_map(cfg);
  const CxMat v_rf = build_v_rf(CxVec::Ones(cfg.n_tx), map);
  const CxMat u_rf = CxMat::Ones(cfg.n_rx, cfg.n_rf_rx);
  std::vector<CxMat> stacked(size_t(cfg.n_subcarriers));
  for (int s = 0; s < cfg.n_subcarriers; ++s) {
    CxMat h_all(cfg.n_users * cfg.n_streams, cfg.n_rf_tx);
    for (int k = 0; k < cfg.n_users; ++k) {
      const CxMat h_eff =
          u_rf.adjoint() * channels.h[size_t(k)][size_t(s)] * v_rf;
      Eigen::JacobiSVD<CxMat> svd(h_eff, Eigen::ComputeThinU);
      const CxMat g = svd.matrixU().leftCols(cfg.n_streams);
      h_all.middleRows(k * cfg.n_streams, cfg.n_streams) = g.adjoint() * h_eff;
    }
    stacked[size_t(s)] = std::move(h_all);
  }
  return stacked;
}

void normalize_budget(const SystemConfig& cfg, std::vector<CxMat>& v) {
  const double c = double(cfg.n_tx) / double(cfg.n_rf_tx);
  for (int s = 0; s < cfg.n_subcarriers; ++s) {
    const double pw = c * v[size_t(s)].squaredNorm();
    if (pw > 0.0)
      v[size_t(s)] *= std::sqrt(cfg.power_budget_w[size_t(s)] / pw);
  }
}

}  // namespace

std::vector<CxMat> zf_precoder(const SystemConfig& cfg,
                               const ChannelSet& channels, bool* ridge_used) {
  if (ridge_used != nullptr) *ridge_used = false;
  const auto stacked = stacked_effective(cfg, channels);
  std::vector<CxMat> v(size_t(cfg.n_subcarriers));
  for (int s = 0; s < cfg.n_subcarriers; ++s) {
    const CxMat& h = stacked[size_t(s)];
    const auto cod = h.completeOrthogonalDecomposition();
    if (cod.rank() < h.rows() && ridge_used != nullptr) *ridge_used = true;
    v[size_t(s)] = cod.pseudoInverse();
  }
  normalize_budget(cfg, v);
  return v;
}

std::vector<CxMat> mrt_precoder(const SystemConfig& cfg,
                                const ChannelSet& channels) {
  const auto stacked = stacked_effective(cfg, channels);
  std::vector<CxMat> v(size_t(cfg.n_subcarriers));
  for (int s = 0; s < cfg.n_subcarriers; ++s)
    v[size_t(s)] = stacked[size_t(s)].adjoint();
  normalize_budget(cfg, v);
  return v;
}

CxMat apply_notch(const CxMat& weights, const CxMat& a_n, bool* ridge_used) {
  if (ridge_used != nullptr) *ridge_used = false;
  if (a_n.rows() == 0) return weights;
  // w <- w - A^+ A w per antenna row: the exact projector onto the
  // unsampled subspace for any sample count or rank. Degenerate sample
  // sets (rank below min(G, S)) are flagged.
  Eigen::CompleteOrthogonalDecomposition<CxMat> cod(a_n);
  if (ridge_used != nullptr)
    *ridge_used = cod.rank() < std::min(a_n.rows(), a_n.cols());
  const CxMat aw = a_n * weights.transpose();  // G x n_tx
  return weights - (cod.pseudoInverse() * aw).transpose();
}

BaselineOutcome eval_digital_baseline(
    const SystemConfig& cfg, const ChannelSet& channels, const MaskSpec& mask,
    const std::vector<std::vector<CxMat>>& symbols, const std::string& method,
    int points_per_bin) {
  const bool notch = method == "zf_notch" || method == "mrt_notch";
  const bool zf = method == "zf" || method == "zf_notch";
  if (!zf && method != "mrt" && method != "mrt_notch")
    throw std::invalid_argument("eval_digital_baseline: unknown method " +
                                method);

  BaselineOutcome out;
  out.method = method;
  const auto v = zf ? zf_precoder(cfg, channels, &out.ridge_used)
                    : mrt_precoder(cfg, channels);

  const AntennaMap map = make_antenna_map(cfg);
  const size_t batch = symbols.size();
  std::vector<CxMat> t_per_b(batch);
  for (size_t b = 0; b < batch; ++b) {
    CxMat t(cfg.n_rf_tx, cfg.n_subcarriers);
    for (int s = 0; s < cfg.n_subcarriers; ++s) {
      CxVec stacked_sym(cfg.n_users * cfg.n_streams);
      for (int k = 0; k < cfg.n_users; ++k)
        stacked_sym.segment(k * cfg.n_streams, cfg.n_streams) =
            symbols[b][size_t(k)].col(s);
      t.col(s) = v[size_t(s)] * stacked_sym;
    }
    t_per_b[b] = std::move(t);
  }

  std::vector<CxVec> ones_ps(batch, CxVec::Ones(cfg.n_tx));
  std::vector<CxMat> w_per_b = antenna_domain(map, t_per_b, ones_ps);
  if (notch) {
    bool ridge = false;
    const CxMat a_n = sampling_matrix(mask.gammas, cfg.n_subcarriers,
                                      cfg.oversampling, cfg.cp_len);
    for (auto& w : w_per_b) {
      bool r = false;
      w = apply_notch(w, a_n, &r);
      ridge = ridge || r;
    }
    out.ridge_used = out.ridge_used || ridge;
  }

  // Evaluate with the antenna weights as one virtual chain per antenna so the
  // notched signals (no longer chain-constant) reuse the combiner machinery.
  SystemConfig flat = cfg;
  flat.n_rf_tx = cfg.n_tx;
  const AntennaMap flat_map = make_antenna_map(flat);
  RxState rx = init_rx_state(flat);
  rx.u_dig = mmse_digital_combiner(flat, flat_map, channels, w_per_b, ones_ps,
                                   symbols, rx.u_rf);
  out.sum_mse = evaluate_objective(flat, channels, flat_map, w_per_b, ones_ps,
                                   rx, symbols);
  out.avg_sum_mse = out.sum_mse / double(cfg.n_subcarriers);

  const EmissionReport emissions =
      emission_report(cfg, w_per_b, mask, points_per_bin);
  out.inband_dbm = emissions.inband_dbm;
  out.oob_dbm = emissions.oob_dbm;
  out.worst_mask_margin_db = emissions.worst_mask_margin_db;
  return out;
}

BcdRun run_random_ps_baseline(const SystemConfig& cfg,
                              const ChannelSet& channels, const MaskSpec& mask,
                              const IdftGrid& idft,
                              const std::vector<std::vector<CxMat>>& symbols,
                              const BcdOptions& base_opts, Rng& rng) {
  BcdOptions opts = base_opts;
  opts.fix_rf = true;
  opts.init_v_ps.assign(size_t(cfg.batch_size), CxVec(cfg.n_tx));
  for (auto& v : opts.init_v_ps)
    for (Eigen::Index a = 0; a < v.size(); ++a)
      v[a] = std::polar(1.0, 2.0 * M_PI * rng.uniform());
  opts.init_u_rf.assign(size_t(cfg.n_users), CxMat(cfg.n_rx, cfg.n_rf_rx));
  for (auto& u : opts.init_u_rf)
    for (int a = 0; a < cfg.n_rx; ++a)
      for (int m = 0; m < cfg.n_rf_rx; ++m)
        u(a, m) = std::polar(1.0, 2.0 * M_PI * rng.uniform());
  return run_bcd(cfg, channels, mask, idft, symbols, opts);
}

}  // namespace maskbeam
