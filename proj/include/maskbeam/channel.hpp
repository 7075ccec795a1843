#pragma once

#include "maskbeam/rng.hpp"
#include "maskbeam/types.hpp"

namespace maskbeam {

struct UserGeometry {
  double distance_m = 0.0;
  double aod_rad = 0.0;  // LOS departure angle from array broadside
  double aoa_rad = 0.0;  // LOS arrival angle; receiver faces the array
};

struct ChannelGenConfig {
  int taps = 4;
  double rician_k_db = 10.0;
  double angle_spread_rad = 10.0 * M_PI / 180.0;
  double disc_radius_m = 4.0;
  double disc_center_m = 100.0;
  double shadow_los_db = 5.8;
  double shadow_nlos_db = 8.7;
  double spacing_over_lambda = 0.5;
  std::vector<UserGeometry> user_geometry;  // empty: drawn from the disc
};

/// Delay-tap decomposition of one user's channel; index 0 is the LOS ray,
/// taps l >= 1 pick up the e^{-j 2 pi l s / S} subcarrier phase.
struct UserTaps {
  std::vector<CxMat> taps;
  UserGeometry geometry;
};

struct ChannelSet {
  std::vector<std::vector<CxMat>> h;  // [user][subcarrier], n_rx x n_tx
  RealMat noise_var;                  // users x subcarriers
  std::vector<UserGeometry> geometry;
};

/// ULA response with entry m = exp(j m psi), psi = 2 pi spacing sin(angle).
CxVec steering_vector(int n, double angle_rad, double spacing_over_lambda);

/// 3GPP-style urban micro loss 22 log10(d) + 28 + 20 log10(fc_GHz) + shadow,
/// returned as a linear power gain.
double path_loss_gain(double d_m, double fc_ghz, double shadow_db);

UserTaps gen_user_taps(const SystemConfig& cfg, const ChannelGenConfig& gen,
                       const UserGeometry& geometry, Rng rng);

/// Frequency response of a tap set at subcarrier s.
CxMat taps_to_freq(const UserTaps& taps, int n_subcarriers, int s);

/// Full channel draw; user k consumes substream k of rng, so generation is
/// reproducible and parallelizable over users.
ChannelSet gen_channels(const SystemConfig& cfg, const ChannelGenConfig& gen,
                        const Rng& rng);

}  // namespace maskbeam
