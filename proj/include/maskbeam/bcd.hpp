#pragma once

#include <string>
#include <vector>

#include "maskbeam/channel.hpp"
#include "maskbeam/rf_phase.hpp"
#include "maskbeam/rng.hpp"
#include "maskbeam/rx_combiner.hpp"
#include "maskbeam/tx_admm.hpp"
#include "maskbeam/types.hpp"

namespace maskbeam {

struct BcdOptions {
  int max_outer = 50;
  double tol = 1e-5;          // stop on relative objective decrease below this
  double robust_sigma_e = 0.0;  // radians; >0 switches PS/combiner rules
  int n_sweeps = 5;           // coordinate sweeps per RF/combiner block
  AdmmOptions admm;
  bool fix_rf = false;        // keep the initial phases on both ends
  bool record_sweep_traces = false;  // per-update objective traces (tests)
  std::vector<CxVec> init_v_ps;              // per realization; empty = ones
  std::vector<CxMat> init_u_rf;              // per user; empty = support ones
  std::vector<Eigen::MatrixXi> connectivity;  // per user; empty = full
};

/// Frobenius norms of each block's change over one cycle.
struct BlockDeltas {
  double combiner_dig = 0.0;
  double transmit = 0.0;
  double rf_tx = 0.0;
  double combiner_rf = 0.0;
};

struct BcdRun {
  /// Monotone merit recorded at each cycle end: the plain objective plus the
  /// transmit ridge terms the inner solver minimizes; this is the trace the
  /// stopping rule and the convergence guarantee refer to.
  std::vector<double> objective_trace;
  /// Plain noise- and batch-averaged sum-MSE at each cycle end (reporting).
  std::vector<double> mse_trace;
  std::vector<BlockDeltas> per_block_deltas;
  std::string stop_reason;      // "tol" or "max_iters"
  bool inner_converged = true;  // false if any transmit solve hit max_iters
  std::vector<TxState> tx;      // per realization, final
  std::vector<CxVec> v_ps;      // per realization, final
  RxState rx;
  std::vector<AdmmReport> admm_last;  // per realization, last cycle
  /// One entry per coordinate-sweep call when record_sweep_traces is set:
  /// the starting objective followed by the value after every update.
  std::vector<std::vector<double>> ps_traces;
  std::vector<std::vector<double>> combiner_traces;
};

/// Noise-averaged batch objective
///   J = (1/B) sum_b sum_{k,s} ||U^H U_RF^H H V_b t_b^s - omega||^2
///     + sum_{k,s} sigma^2 ||U_RF U||_F^2.
double evaluate_objective(const SystemConfig& cfg, const ChannelSet& channels,
                          const AntennaMap& map,
                          const std::vector<CxMat>& t_per_b,
                          const std::vector<CxVec>& v_ps_per_b,
                          const RxState& rx,
                          const std::vector<std::vector<CxMat>>& symbols);

/// Per-(user, subcarrier) split of the same objective (K x S); summing all
/// entries gives evaluate_objective.
RealMat user_subcarrier_mse(const SystemConfig& cfg, const ChannelSet& channels,
                            const AntennaMap& map,
                            const std::vector<CxMat>& t_per_b,
                            const std::vector<CxVec>& v_ps_per_b,
                            const RxState& rx,
                            const std::vector<std::vector<CxMat>>& symbols);

/// evaluate_objective plus the transmit regularizers implied by t alone:
/// (1/B) sum_b ((eta_w n_tx/n_rf_tx + eta_t)/2) ||t_b||_F^2.
double evaluate_objective_regularized(
    const SystemConfig& cfg, const ChannelSet& channels, const AntennaMap& map,
    const std::vector<CxMat>& t_per_b, const std::vector<CxVec>& v_ps_per_b,
    const RxState& rx, const std::vector<std::vector<CxMat>>& symbols);

/// Outer block loop: (1) digital combiners, (2) per-realization transmit
/// solve + digital-precoder recovery, (3) per-realization transmit PS sweeps,
/// (4) analog combiner sweeps; objective evaluated after each cycle; stops on
/// relative decrease < tol or after max_outer cycles.
BcdRun run_bcd(const SystemConfig& cfg, const ChannelSet& channels,
               const MaskSpec& mask, const IdftGrid& idft,
               const std::vector<std::vector<CxMat>>& symbols,
               const BcdOptions& opts = {});

/// Realized objective under iid Gaussian phase errors (std sigma_e_rad) on
/// every transmit PS entry and every wired receive combiner entry,
/// Monte-Carlo averaged over n_draws error realizations.
double phase_error_objective(const SystemConfig& cfg,
                             const ChannelSet& channels, const AntennaMap& map,
                             const std::vector<CxMat>& t_per_b,
                             const std::vector<CxVec>& v_ps_per_b,
                             const RxState& rx,
                             const std::vector<std::vector<CxMat>>& symbols,
                             double sigma_e_rad, int n_draws, Rng& rng);

}  // namespace maskbeam
