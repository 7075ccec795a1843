#pragma once

#include <string>
#include <vector>

#include "maskbeam/bcd.hpp"
#include "maskbeam/constellation.hpp"

namespace maskbeam {

/// Column sums of user_subcarrier_mse; adds up to evaluate_objective.
RealVec per_subcarrier_mse(const SystemConfig& cfg, const ChannelSet& channels,
                           const AntennaMap& map,
                           const std::vector<CxMat>& t_per_b,
                           const std::vector<CxVec>& v_ps_per_b,
                           const RxState& rx,
                           const std::vector<std::vector<CxMat>>& symbols);

/// Per-(user, subcarrier) error vector magnitude sqrt(MSE / n_streams); the
/// denominator is the expected symbol energy of the unit-energy constellation.
RealMat evm(const SystemConfig& cfg, const ChannelSet& channels,
            const AntennaMap& map, const std::vector<CxMat>& t_per_b,
            const std::vector<CxVec>& v_ps_per_b, const RxState& rx,
            const std::vector<std::vector<CxMat>>& symbols);

/// Per-subcarrier symbol error rate over the batch and n_noise_draws AWGN
/// draws per (realization, user, subcarrier): hard decisions on
/// U^H U_RF^H (H x + n) against the transmitted indices.
RealVec symbol_error_rate(const SystemConfig& cfg, const ChannelSet& channels,
                          const AntennaMap& map,
                          const std::vector<CxMat>& t_per_b,
                          const std::vector<CxVec>& v_ps_per_b,
                          const RxState& rx, const SymbolBatch& batch,
                          const Constellation& constellation,
                          int n_noise_draws, Rng& rng);

/// Antenna-domain subcarrier weights of each realization:
/// row a is v_ps[a] * t(m_a, :).
std::vector<CxMat> antenna_domain(const AntennaMap& map,
                                  const std::vector<CxMat>& t_per_b,
                                  const std::vector<CxVec>& v_ps_per_b);

struct EmissionReport {
  double inband_dbm = -400.0;
  double oob_dbm = -400.0;
  /// min over realizations, antennas and enforcement samples of
  /// limit_db - measured_db; +inf when the mask has no samples.
  double worst_mask_margin_db = 0.0;
  std::vector<double> gammas;  // dense export grid
  RealVec freq_hz;
  RealMat psd_w_hz;  // n_tx x grid, averaged over realizations
};

/// Integrates the batch-averaged periodogram PSD over the in-band span
/// |f| <= bandwidth/2 and over both mask enforcement spans (trapezoid on the
/// dense grid, summed across antennas), and evaluates the worst margin at the
/// mask's enforcement samples per realization.
EmissionReport emission_report(const SystemConfig& cfg,
                               const std::vector<CxMat>& w_per_b,
                               const MaskSpec& mask, int points_per_bin = 8);

/// Per-subcarrier digital baseline precoders (n_rf_tx x n_users*n_streams)
/// on the effective channel seen through all-ones RF stages, column blocks
/// per user, scaled so the expected radiated power meets the budget with
/// equality. ZF reduces each user to n_streams dominant receive directions
/// and inverts the stacked channel; a rank-deficient stack falls back to the
/// rank-revealing pseudo-inverse (flagged through ridge_used).
std::vector<CxMat> zf_precoder(const SystemConfig& cfg,
                               const ChannelSet& channels,
                               bool* ridge_used = nullptr);
std::vector<CxMat> mrt_precoder(const SystemConfig& cfg,
                                const ChannelSet& channels);

/// Least-distortion spectral notching: every antenna row w of weights is
/// replaced by (I - A^H (A A^H)^{-1} A) w, zeroing the sampled spectrum.
/// Rank-revealing pseudo-inverse; degenerate sample sets are flagged.
CxMat apply_notch(const CxMat& weights, const CxMat& a_n,
                  bool* ridge_used = nullptr);

struct BaselineOutcome {
  std::string method;
  double sum_mse = 0.0;      // J
  double avg_sum_mse = 0.0;  // J / S
  double inband_dbm = -400.0;
  double oob_dbm = -400.0;
  double worst_mask_margin_db = 0.0;
  bool ridge_used = false;
};

/// Evaluates a fixed digital baseline ("zf", "mrt", "zf_notch", "mrt_notch"):
/// transmit t = V omega per realization through all-ones RF stages, optional
/// notching of the antenna weights, one MMSE digital combiner update, then
/// objective and emissions.
BaselineOutcome eval_digital_baseline(const SystemConfig& cfg,
                                      const ChannelSet& channels,
                                      const MaskSpec& mask,
                                      const std::vector<std::vector<CxMat>>& symbols,
                                      const std::string& method,
                                      int points_per_bin = 8);

/// Full pipeline with random frozen phases on both RF stages (digital blocks
/// still optimized): the random-PS reference. Draw order: per realization the
/// n_tx transmit phases, then per user the wired combiner entries.
BcdRun run_random_ps_baseline(const SystemConfig& cfg,
                              const ChannelSet& channels, const MaskSpec& mask,
                              const IdftGrid& idft,
                              const std::vector<std::vector<CxMat>>& symbols,
                              const BcdOptions& base_opts, Rng& rng);

}  // namespace maskbeam
