#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <vector>

namespace maskbeam {

using cxd = std::complex<double>;
using CxMat = Eigen::MatrixXcd;
using CxVec = Eigen::VectorXcd;
using RealVec = Eigen::VectorXd;
using RealMat = Eigen::MatrixXd;

/// Static description of one simulated link.
///
/// Dimensions follow the usual hybrid-architecture conventions: n_tx antennas
/// driven by n_rf_tx chains through a partially connected phase-shifter bank
/// (n_tx/n_rf_tx antennas per chain), n_users receivers each with n_rx
/// antennas, n_rf_rx chains and n_streams data streams.
struct SystemConfig {
  int n_tx = 16;
  int n_rf_tx = 8;
  int n_users = 2;
  int n_rx = 2;
  int n_rf_rx = 2;
  int n_streams = 2;
  int n_subcarriers = 16;
  int oversampling = 4;
  int cp_len = 4;
  std::vector<double> power_budget_w;  // one entry per subcarrier
  double clip_level = 3.0;
  int qam_order = 16;
  int batch_size = 8;
  double reg_w = 0.0;    // 0 = derive as 1e-4 * mean power budget
  double reg_t = 0.0;    // 0 = derive as 1e-4 * mean power budget
  double admm_rho = 1.0; // multiplier on mean squared effective-channel norm
  double noise_psd_dbm_hz = -174.0;
  double noise_figure_db = 8.0;
  double carrier_ghz = 28.0;
  double bandwidth_hz = 20e6;
  std::uint64_t seed = 1;

  int antennas_per_chain() const { return n_tx / n_rf_tx; }
  double mean_power_budget() const;
  double resolved_reg_w() const;
  double resolved_reg_t() const;

  /// Throws std::invalid_argument describing the first violated constraint.
  void validate() const;
};

/// Fixed antenna-to-chain wiring of the partially connected bank.
/// Antenna a belongs to chain a / (n_tx/n_rf_tx); blocks are contiguous and
/// balanced, and every antenna appears in exactly one block.
struct AntennaMap {
  std::vector<int> chain_of;               // size n_tx
  std::vector<std::vector<int>> antennas_of;  // size n_rf_tx
};

AntennaMap make_antenna_map(const SystemConfig& cfg);

/// Thermal noise power per subcarrier in watts.
double noise_variance_w(const SystemConfig& cfg);

inline double dbm_to_watts(double dbm) {
  return 1e-3 * std::pow(10.0, dbm / 10.0);
}

/// Floors at -400 dBm so exactly-zero power stays plottable.
inline double watts_to_dbm(double w) {
  if (!(w > 1e-43)) return -400.0;
  return 10.0 * std::log10(w * 1e3);
}

inline double dbm_per_100khz_to_w_per_hz(double dbm) {
  return dbm_to_watts(dbm) / 1e5;
}

inline double w_per_hz_to_dbm_per_100khz(double w) {
  return watts_to_dbm(w * 1e5);
}

}  // namespace maskbeam
