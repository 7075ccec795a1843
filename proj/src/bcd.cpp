#include "maskbeam/bcd.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace maskbeam {

namespace {

CxVec antenna_signal(const CxVec& v_ps, const AntennaMap& map, const CxMat& t,
                     int s) {
  CxVec x(Eigen::Index(map.chain_of.size()));
  for (Eigen::Index a = 0; a < x.size(); ++a)
    x[a] = v_ps[a] * t(map.chain_of[size_t(a)], s);
  return x;
}

std::vector<CxMat> collect_t(const std::vector<TxState>& states) {
  std::vector<CxMat> t;
  t.reserve(states.size());
  for (const auto& st : states) t.push_back(st.t);
  return t;
}

double ridge_weight(const SystemConfig& cfg) {
  const double c = double(cfg.n_tx) / double(cfg.n_rf_tx);
  return 0.5 * (cfg.resolved_reg_w() * c + cfg.resolved_reg_t());
}

}  // namespace

RealMat user_subcarrier_mse(const SystemConfig& cfg, const ChannelSet& channels,
                            const AntennaMap& map,
                            const std::vector<CxMat>& t_per_b,
                            const std::vector<CxVec>& v_ps_per_b,
                            const RxState& rx,
                            const std::vector<std::vector<CxMat>>& symbols) {
  const size_t batch = t_per_b.size();
  RealMat mse = RealMat::Zero(cfg.n_users, cfg.n_subcarriers);
  for (size_t b = 0; b < batch; ++b)
    for (int s = 0; s < cfg.n_subcarriers; ++s) {
      const CxVec x = antenna_signal(v_ps_per_b[b], map, t_per_b[b], s);
      for (int k = 0; k < cfg.n_users; ++k) {
        const CxVec z = rx.u_rf[size_t(k)].adjoint() *
                        (channels.h[size_t(k)][size_t(s)] * x);
        const CxVec err = rx.u_dig[size_t(k)][size_t(s)].adjoint() * z -
                          symbols[b][size_t(k)].col(s);
        mse(k, s) += err.squaredNorm();
      }
    }
  mse /= double(batch);
  for (int k = 0; k < cfg.n_users; ++k)
    for (int s = 0; s < cfg.n_subcarriers; ++s)
      mse(k, s) += channels.noise_var(k, s) *
                   (rx.u_rf[size_t(k)] * rx.u_dig[size_t(k)][size_t(s)])
                       .squaredNorm();
  return mse;
}

double evaluate_objective(const SystemConfig& cfg, const ChannelSet& channels,
                          const AntennaMap& map,
                          const std::vector<CxMat>& t_per_b,
                          const std::vector<CxVec>& v_ps_per_b,
                          const RxState& rx,
                          const std::vector<std::vector<CxMat>>& symbols) {
  return user_subcarrier_mse(cfg, channels, map, t_per_b, v_ps_per_b, rx,
                             symbols)
      .sum();
}

double evaluate_objective_regularized(
    const SystemConfig& cfg, const ChannelSet& channels, const AntennaMap& map,
    const std::vector<CxMat>& t_per_b, const std::vector<CxVec>& v_ps_per_b,
    const RxState& rx, const std::vector<std::vector<CxMat>>& symbols) {
  double reg = 0.0;
  for (const CxMat& t : t_per_b) reg += t.squaredNorm();
  reg *= ridge_weight(cfg) / double(t_per_b.size());
  return evaluate_objective(cfg, channels, map, t_per_b, v_ps_per_b, rx,
                            symbols) +
         reg;
}

BcdRun run_bcd(const SystemConfig& cfg, const ChannelSet& channels,
               const MaskSpec& mask, const IdftGrid& idft,
               const std::vector<std::vector<CxMat>>& symbols,
               const BcdOptions& opts) {
  const AntennaMap map = make_antenna_map(cfg);
  const size_t batch = size_t(cfg.batch_size);
  if (symbols.size() != batch)
    throw std::invalid_argument("run_bcd: symbols batch size mismatch");
  const double c = double(cfg.n_tx) / double(cfg.n_rf_tx);

  BcdRun run;
  run.rx = init_rx_state(cfg, opts.connectivity);
  if (!opts.init_u_rf.empty()) {
    if (opts.init_u_rf.size() != size_t(cfg.n_users))
      throw std::invalid_argument("run_bcd: init_u_rf needs one entry per user");
    for (int k = 0; k < cfg.n_users; ++k)
      run.rx.u_rf[size_t(k)] =
          opts.init_u_rf[size_t(k)].cwiseProduct(
              run.rx.connectivity[size_t(k)].cast<double>().cast<cxd>());
  }
  run.v_ps.assign(batch, CxVec::Ones(cfg.n_tx));
  if (!opts.init_v_ps.empty()) {
    if (opts.init_v_ps.size() != batch)
      throw std::invalid_argument("run_bcd: init_v_ps needs one entry per realization");
    run.v_ps = opts.init_v_ps;
  }

  // Matched-filter start at per-subcarrier power equality; gives the first
  // combiner update well-scaled transmit statistics.
  std::vector<TxState> states(batch);
  for (size_t b = 0; b < batch; ++b) {
    const auto b_eff =
        build_effective_channels(channels, run.v_ps[b], run.rx, map);
    states[b].t.resize(cfg.n_rf_tx, cfg.n_subcarriers);
    for (int s = 0; s < cfg.n_subcarriers; ++s) {
      CxVec mf = CxVec::Zero(cfg.n_rf_tx);
      for (int k = 0; k < cfg.n_users; ++k)
        mf.noalias() += b_eff[size_t(k)][size_t(s)].adjoint() *
                        symbols[b][size_t(k)].col(s);
      const double pw = c * mf.squaredNorm();
      if (pw > 0.0) mf *= std::sqrt(cfg.power_budget_w[size_t(s)] / pw);
      states[b].t.col(s) = mf;
    }
  }
  bool warm = false;

  double prev = 0.0;
  for (int cycle = 0; cycle < opts.max_outer; ++cycle) {
    BlockDeltas delta;

    auto u_new = mmse_digital_combiner(cfg, map, channels, collect_t(states),
                                       run.v_ps, symbols, run.rx.u_rf);
    double acc = 0.0;
    for (int k = 0; k < cfg.n_users; ++k)
      for (int s = 0; s < cfg.n_subcarriers; ++s)
        acc += (u_new[size_t(k)][size_t(s)] - run.rx.u_dig[size_t(k)][size_t(s)])
                   .squaredNorm();
    delta.combiner_dig = std::sqrt(acc);
    run.rx.u_dig = std::move(u_new);

    run.admm_last.clear();
    acc = 0.0;
    for (size_t b = 0; b < batch; ++b) {
      const auto b_eff =
          build_effective_channels(channels, run.v_ps[b], run.rx, map);
      auto [st, rep] = admm_solve(b_eff, symbols[b], mask, idft, cfg, map,
                                  warm ? &states[b] : nullptr, opts.admm);
      acc += (st.t - states[b].t).squaredNorm();
      states[b] = std::move(st);
      run.inner_converged = run.inner_converged && rep.converged;
      run.admm_last.push_back(std::move(rep));
    }
    delta.transmit = std::sqrt(acc);
    warm = true;

    if (!opts.fix_rf) {
      PsSweepOptions ps_opts;
      ps_opts.n_sweeps = opts.n_sweeps;
      acc = 0.0;
      for (size_t b = 0; b < batch; ++b) {
        const PsProblem problem =
            build_ps_problem(cfg, map, channels, states[b].t, symbols[b],
                             run.rx, opts.robust_sigma_e);
        CxVec v = run.v_ps[b];
        std::vector<double>* trace = nullptr;
        if (opts.record_sweep_traces) {
          run.ps_traces.emplace_back();
          trace = &run.ps_traces.back();
        }
        ps_coordinate_sweep(problem, v, ps_opts, trace);
        acc += (v - run.v_ps[b]).squaredNorm();
        run.v_ps[b] = std::move(v);
      }
      delta.rf_tx = std::sqrt(acc);

      const TxAverages avg =
          tx_sample_averages(cfg, map, collect_t(states), run.v_ps, symbols);
      CombinerSweepOptions cs_opts;
      cs_opts.n_sweeps = opts.n_sweeps;
      cs_opts.sigma_e = opts.robust_sigma_e;
      const std::vector<CxMat> old_u_rf = run.rx.u_rf;
      std::vector<double>* ctrace = nullptr;
      if (opts.record_sweep_traces) {
        run.combiner_traces.emplace_back();
        ctrace = &run.combiner_traces.back();
      }
      analog_combiner_sweep(cfg, channels, avg, run.rx.u_dig, run.rx.u_rf,
                            run.rx.connectivity, cs_opts, ctrace);
      acc = 0.0;
      for (int k = 0; k < cfg.n_users; ++k)
        acc += (run.rx.u_rf[size_t(k)] - old_u_rf[size_t(k)]).squaredNorm();
      delta.combiner_rf = std::sqrt(acc);
    }

    const double plain = evaluate_objective(cfg, channels, map,
                                            collect_t(states), run.v_ps,
                                            run.rx, symbols);
    double reg = 0.0;
    for (const auto& st : states) reg += st.t.squaredNorm();
    const double merit = plain + ridge_weight(cfg) * reg / double(batch);
    run.mse_trace.push_back(plain);
    run.objective_trace.push_back(merit);
    run.per_block_deltas.push_back(delta);

    if (cycle > 0) {
      const double rel =
          (prev - merit) / std::max(std::abs(prev), 1e-300);
      if (rel < opts.tol) {
        run.stop_reason = "tol";
        prev = merit;
        break;
      }
    }
    prev = merit;
  }
  if (run.stop_reason.empty()) run.stop_reason = "max_iters";
  run.tx = std::move(states);
  return run;
}

double phase_error_objective(const SystemConfig& cfg,
                             const ChannelSet& channels, const AntennaMap& map,
                             const std::vector<CxMat>& t_per_b,
                             const std::vector<CxVec>& v_ps_per_b,
                             const RxState& rx,
                             const std::vector<std::vector<CxMat>>& symbols,
                             double sigma_e_rad, int n_draws, Rng& rng) {
  if (sigma_e_rad <= 0.0 || n_draws < 1)
    return evaluate_objective(cfg, channels, map, t_per_b, v_ps_per_b, rx,
                              symbols);
  double acc = 0.0;
  std::vector<CxVec> v = v_ps_per_b;
  RxState perturbed = rx;
  for (int draw = 0; draw < n_draws; ++draw) {
    for (size_t b = 0; b < v.size(); ++b)
      for (Eigen::Index a = 0; a < v[b].size(); ++a)
        v[b][a] = v_ps_per_b[b][a] *
                  std::polar(1.0, sigma_e_rad * rng.normal());
    for (int k = 0; k < cfg.n_users; ++k) {
      const Eigen::MatrixXi& support = rx.connectivity[size_t(k)];
      for (int a = 0; a < cfg.n_rx; ++a)
        for (int m = 0; m < cfg.n_rf_rx; ++m)
          if (support(a, m) != 0)
            perturbed.u_rf[size_t(k)](a, m) =
                rx.u_rf[size_t(k)](a, m) *
                std::polar(1.0, sigma_e_rad * rng.normal());
    }
    acc += evaluate_objective(cfg, channels, map, t_per_b, v, perturbed,
                              symbols);
  }
  return acc / double(n_draws);
}

}  // namespace maskbeam
