#pragma once

#include "maskbeam/channel.hpp"
#include "maskbeam/types.hpp"

namespace maskbeam {

/// Receive-side state: one analog combiner per user (n_rx x n_rf_rx,
/// unit-modulus on its support) and one digital combiner per user and
/// subcarrier (n_rf_rx x n_streams). connectivity[k](a,m) == 1 marks entries
/// the hardware wires up; everything else stays exactly zero through all
/// updates.
struct RxState {
  std::vector<CxMat> u_rf;
  std::vector<std::vector<CxMat>> u_dig;  // [user][subcarrier]
  std::vector<Eigen::MatrixXi> connectivity;
};

/// All-ones analog combiners (masked by the support), identity-slice digital
/// combiners. Passing no support gives fully connected combiners.
RxState init_rx_state(const SystemConfig& cfg,
                      const std::vector<Eigen::MatrixXi>& connectivity = {});

/// Batch sample averages of the antenna-domain transmit statistics:
/// r_tt[s]    = mean_b  V_b t_b^s (V_b t_b^s)^H           (n_tx x n_tx)
/// r_tw[k][s] = mean_b  V_b t_b^s (omega_k^s(b))^H        (n_tx x n_streams)
/// sym_energy(k,s) = mean_b ||omega_k^s(b)||^2.
struct TxAverages {
  std::vector<CxMat> r_tt;
  std::vector<std::vector<CxMat>> r_tw;
  RealMat sym_energy;
};

TxAverages tx_sample_averages(const SystemConfig& cfg, const AntennaMap& map,
                              const std::vector<CxMat>& t_per_b,
                              const std::vector<CxVec>& v_ps_per_b,
                              const std::vector<std::vector<CxMat>>& symbols);

/// Closed-form per-(k,s) MMSE digital combiners for the current batch:
/// U = (mean_b Hb t t^H Hb^H + sigma^2 U_RF^H U_RF)^{-1} mean_b Hb t omega^H
/// with Hb = U_RF^H H V_b.
std::vector<std::vector<CxMat>> mmse_digital_combiner(
    const SystemConfig& cfg, const AntennaMap& map, const ChannelSet& channels,
    const std::vector<CxMat>& t_per_b, const std::vector<CxVec>& v_ps_per_b,
    const std::vector<std::vector<CxMat>>& symbols,
    const std::vector<CxMat>& u_rf);

/// Linear and quadratic coefficients of entry (a,m) of user k's analog
/// combiner: beta1 = [sum_s H R_tw U^H]_{a,m} and
/// beta2 = [sum_s (H R_tt H^H + sigma^2 I) U_masked U U^H]_{a,m} where
/// U_masked has entry (a,m) zeroed.
std::pair<cxd, cxd> analog_combiner_betas(const SystemConfig& cfg,
                                          const ChannelSet& channels,
                                          const TxAverages& avg,
                                          const std::vector<std::vector<CxMat>>& u_dig,
                                          const CxMat& u_rf_masked, int user,
                                          int a, int m);

struct CombinerSweepOptions {
  int n_sweeps = 5;
  double sigma_e = 0.0;  // phase-error std dev in radians; 0 = nominal rule
  double tol = 1e-10;    // early exit on relative cost decrease
};

/// Cyclic unit-modulus updates over every user's wired combiner entries
/// (connectivity[k](a,m) == 1); unwired entries are never touched.
/// With sigma_e > 0 the update uses the error-averaged coefficients
/// -(e^{-sigma^2/2} beta2 - beta1)/|...|; a zero denominator keeps the entry.
/// If trace is given, the summed user costs are recorded before the first
/// update and after every entry update (test hook; recomputed exactly).
void analog_combiner_sweep(const SystemConfig& cfg, const ChannelSet& channels,
                           const TxAverages& avg,
                           const std::vector<std::vector<CxMat>>& u_dig,
                           std::vector<CxMat>& u_rf,
                           const std::vector<Eigen::MatrixXi>& connectivity,
                           const CombinerSweepOptions& opts,
                           std::vector<double>* trace = nullptr);

/// Noise-averaged batch cost of user k under the current combiners,
/// sum_s E tr(E_k^s); summing over users gives the global objective.
double combiner_user_cost(const SystemConfig& cfg, const ChannelSet& channels,
                          const TxAverages& avg,
                          const std::vector<std::vector<CxMat>>& u_dig,
                          const std::vector<CxMat>& u_rf, int user);

}  // namespace maskbeam
