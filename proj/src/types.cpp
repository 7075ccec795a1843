#include "maskbeam/types.hpp"

#include <numeric>
#include <stdexcept>
#include <string>

namespace maskbeam {

namespace {
void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("config: " + what);
}
}  // namespace

double SystemConfig::mean_power_budget() const {
  if (power_budget_w.empty()) return 0.0;
  const double sum =
      std::accumulate(power_budget_w.begin(), power_budget_w.end(), 0.0);
  return sum / double(power_budget_w.size());
}

double SystemConfig::resolved_reg_w() const {
  return reg_w > 0.0 ? reg_w : 1e-4 * mean_power_budget();
}

double SystemConfig::resolved_reg_t() const {
  return reg_t > 0.0 ? reg_t : 1e-4 * mean_power_budget();
}

void SystemConfig::validate() const {
  require(n_tx > 0, "n_tx must be positive");
  require(n_rf_tx > 0, "n_rf_tx must be positive");
  require(n_tx % n_rf_tx == 0, "n_tx must be divisible by n_rf_tx");
  require(n_users > 0, "n_users must be positive");
  require(n_rx > 0, "n_rx must be positive");
  require(n_rf_rx > 0, "n_rf_rx must be positive");
  require(n_streams > 0, "n_streams must be positive");
  require(n_streams <= n_rf_rx, "n_streams must not exceed n_rf_rx");
  require(n_rf_rx <= n_rx, "n_rf_rx must not exceed n_rx");
  require(n_subcarriers >= 2, "n_subcarriers must be at least 2");
  require(n_subcarriers % 2 == 0, "n_subcarriers must be even");
  require(oversampling >= 1, "oversampling must be at least 1");
  require(cp_len >= 0, "cp_len must be non-negative");
  require(int(power_budget_w.size()) == n_subcarriers,
          "power_budget_w needs one entry per subcarrier");
  for (double p : power_budget_w)
    require(p > 0.0, "power budgets must be positive");
  require(clip_level > 0.0, "clip_level must be positive");
  require(qam_order == 4 || qam_order == 16 || qam_order == 64 ||
              qam_order == 256,
          "qam_order must be one of 4, 16, 64, 256");
  require(batch_size >= 1, "batch_size must be at least 1");
  require(reg_w >= 0.0, "reg_w must be non-negative");
  require(reg_t >= 0.0, "reg_t must be non-negative");
  require(admm_rho > 0.0, "admm_rho must be positive");
  require(bandwidth_hz > 0.0, "bandwidth_hz must be positive");
  require(carrier_ghz > 0.0, "carrier_ghz must be positive");
  require(resolved_reg_w() > 0.0 && resolved_reg_t() > 0.0,
          "regularizers must resolve to positive values");
}

AntennaMap make_antenna_map(const SystemConfig& cfg) {
  AntennaMap map;
  const int per = cfg.antennas_per_chain();
  map.chain_of.resize(cfg.n_tx);
  map.antennas_of.assign(cfg.n_rf_tx, {});
  for (int a = 0; a < cfg.n_tx; ++a) {
    const int m = a / per;
    map.chain_of[a] = m;
    map.antennas_of[m].push_back(a);
  }
  return map;
}

double noise_variance_w(const SystemConfig& cfg) {
  const double psd_w_hz = dbm_to_watts(cfg.noise_psd_dbm_hz);
  const double bw_per_sc = cfg.bandwidth_hz / double(cfg.n_subcarriers);
  return psd_w_hz * bw_per_sc * std::pow(10.0, cfg.noise_figure_db / 10.0);
}

}  // namespace maskbeam
