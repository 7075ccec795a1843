#include "maskbeam/channel.hpp"

#include <stdexcept>

namespace maskbeam {

CxVec steering_vector(int n, double angle_rad, double spacing_over_lambda) {
  if (n < 1) throw std::invalid_argument("steering_vector: n must be >= 1");
  const double psi = 2.0 * M_PI * spacing_over_lambda * std::sin(angle_rad);
  CxVec a(n);
  for (int m = 0; m < n; ++m)
    a[m] = cxd(std::cos(m * psi), std::sin(m * psi));
  return a;
}

double path_loss_gain(double d_m, double fc_ghz, double shadow_db) {
  const double pl_db =
      22.0 * std::log10(d_m) + 28.0 + 20.0 * std::log10(fc_ghz) + shadow_db;
  return std::pow(10.0, -pl_db / 10.0);
}

UserTaps gen_user_taps(const SystemConfig& cfg, const ChannelGenConfig& gen,
                       const UserGeometry& geometry, Rng rng) {
  if (gen.taps < 1) throw std::invalid_argument("channel: taps must be >= 1");
  const double kappa = std::pow(10.0, gen.rician_k_db / 10.0);
  const double los_w = std::sqrt(kappa / (kappa + 1.0));
  const double nlos_w = std::sqrt(1.0 / (kappa + 1.0));

  UserTaps out;
  out.geometry = geometry;
  out.taps.reserve(size_t(gen.taps));

  const double g_los = path_loss_gain(geometry.distance_m, cfg.carrier_ghz,
                                      gen.shadow_los_db * rng.normal());
  const CxVec ar = steering_vector(cfg.n_rx, geometry.aoa_rad,
                                   gen.spacing_over_lambda);
  const CxVec at = steering_vector(cfg.n_tx, geometry.aod_rad,
                                   gen.spacing_over_lambda);
  out.taps.push_back(los_w * std::sqrt(g_los) * (ar * at.adjoint()));

  for (int l = 1; l < gen.taps; ++l) {
    const double g = path_loss_gain(geometry.distance_m, cfg.carrier_ghz,
                                    gen.shadow_nlos_db * rng.normal());
    const double aod = geometry.aod_rad + gen.angle_spread_rad * rng.normal();
    const double aoa = geometry.aoa_rad + gen.angle_spread_rad * rng.normal();
    const cxd h = rng.cnormal();
    const CxVec arl = steering_vector(cfg.n_rx, aoa, gen.spacing_over_lambda);
    const CxVec atl = steering_vector(cfg.n_tx, aod, gen.spacing_over_lambda);
    out.taps.push_back(nlos_w * std::sqrt(g) * h * (arl * atl.adjoint()));
  }
  return out;
}

CxMat taps_to_freq(const UserTaps& taps, int n_subcarriers, int s) {
  CxMat h = taps.taps[0];
  for (size_t l = 1; l < taps.taps.size(); ++l) {
    const double ang = -2.0 * M_PI * double(l) * double(s) / n_subcarriers;
    h += taps.taps[l] * cxd(std::cos(ang), std::sin(ang));
  }
  return h;
}

ChannelSet gen_channels(const SystemConfig& cfg, const ChannelGenConfig& gen,
                        const Rng& rng) {
  ChannelSet set;
  set.h.resize(size_t(cfg.n_users));
  set.geometry.resize(size_t(cfg.n_users));
  set.noise_var =
      RealMat::Constant(cfg.n_users, cfg.n_subcarriers, noise_variance_w(cfg));

  for (int k = 0; k < cfg.n_users; ++k) {
    Rng ru = rng.substream(k);
    UserGeometry geo;
    if (size_t(k) < gen.user_geometry.size()) {
      geo = gen.user_geometry[size_t(k)];
    } else {
      // uniform over a disc of radius R centred disc_center_m ahead
      const double r = gen.disc_radius_m * std::sqrt(ru.uniform());
      const double t = 2.0 * M_PI * ru.uniform();
      const double x = gen.disc_center_m + r * std::cos(t);
      const double y = r * std::sin(t);
      geo.distance_m = std::hypot(x, y);
      geo.aod_rad = std::atan2(y, x);
      geo.aoa_rad = 0.0;
    }
    set.geometry[size_t(k)] = geo;
    const UserTaps taps = gen_user_taps(cfg, gen, geo, ru.substream(0x7a));
    set.h[size_t(k)].resize(size_t(cfg.n_subcarriers));
    for (int s = 0; s < cfg.n_subcarriers; ++s)
      set.h[size_t(k)][size_t(s)] = taps_to_freq(taps, cfg.n_subcarriers, s);
  }
  return set;
}

}  // namespace maskbeam
