#include "maskbeam/spectral.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace maskbeam {

IdftGrid build_idft(int n_subcarriers, int oversampling) {
  if (n_subcarriers < 1 || oversampling < 1)
    throw std::invalid_argument("idft grid dimensions must be positive");
  const int ls = oversampling * n_subcarriers;
  IdftGrid grid;
  grid.n_subcarriers = n_subcarriers;
  grid.oversampling = oversampling;
  grid.f_herm.resize(ls, n_subcarriers);
  const double scale = 1.0 / std::sqrt(double(ls));
  for (int n = 0; n < ls; ++n)
    for (int s = 0; s < n_subcarriers; ++s) {
      const double ang = 2.0 * M_PI * double(n) * double(s) / double(ls);
      grid.f_herm(n, s) = scale * cxd(std::cos(ang), std::sin(ang));
    }
  return grid;
}

CxMat sampling_matrix(const std::vector<double>& gammas, int n_subcarriers,
                      int oversampling, int cp_len) {
  const int ls = oversampling * n_subcarriers;
  const int lcp = oversampling * cp_len;
  const int len = ls + lcp;
  const double scale = 1.0 / std::sqrt(double(ls));
  CxMat a(Eigen::Index(gammas.size()), n_subcarriers);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (int s = 0; s < n_subcarriers; ++s) {
      const double delta = (gammas[size_t(i)] - double(s)) / double(ls);
      if (std::abs(delta - std::round(delta)) < 1e-9) {
        a(i, s) = cxd(double(len) * scale, 0.0);
        continue;
      }
      const double phase = M_PI * delta * double(lcp - ls + 1);
      const double ratio =
          std::sin(M_PI * delta * double(len)) / std::sin(M_PI * delta);
      a(i, s) = scale * ratio * cxd(std::cos(phase), std::sin(phase));
    }
  }
  return a;
}

double MaskProfile::limit_dbm_100khz(double f_abs_hz) const {
  const double f = std::abs(f_abs_hz);
  if (f < f_inactive_hz || segments.empty())
    return std::numeric_limits<double>::infinity();
  if (f < segments.front().f_start_hz)
    return segments.front().limit_start_dbm_100khz;
  for (const Segment& seg : segments) {
    if (f <= seg.f_end_hz) {
      if (f < seg.f_start_hz) return seg.limit_start_dbm_100khz;  // gap
      const double t = (f - seg.f_start_hz) / (seg.f_end_hz - seg.f_start_hz);
      return seg.limit_start_dbm_100khz +
             t * (seg.limit_end_dbm_100khz - seg.limit_start_dbm_100khz);
    }
  }
  return segments.back().limit_end_dbm_100khz;
}

void MaskProfile::validate() const {
  if (!(f_inactive_hz >= 0.0))
    throw std::invalid_argument("mask: f_inactive_hz must be non-negative");
  if (segments.empty())
    throw std::invalid_argument("mask: needs at least one segment");
  double prev_end = f_inactive_hz;
  for (const Segment& seg : segments) {
    if (!(seg.f_end_hz > seg.f_start_hz))
      throw std::invalid_argument("mask: segment must have f_end > f_start");
    if (seg.f_start_hz + 1e-9 < prev_end)
      throw std::invalid_argument("mask: segments overlap or precede the "
                                  "inactive boundary");
    if (!std::isfinite(seg.limit_start_dbm_100khz) ||
        !std::isfinite(seg.limit_end_dbm_100khz))
      throw std::invalid_argument("mask: limits must be finite");
    prev_end = seg.f_end_hz;
  }
}

MaskProfile builtin_mask(int id) {
  MaskProfile p;
  p.f_inactive_hz = 10.01e6;
  if (id >= 1 && id <= 4) {
    const double start = -60.0 - 5.0 * double(id - 1);
    p.name = "mask" + std::to_string(id);
    p.segments.push_back({10.01e6, 12.5e6, start, start - 10.0});
  } else if (id == 5) {
    p.name = "mask5";
    // Flat floor; a short dummy ramp keeps the representation uniform.
    p.segments.push_back({10.01e6, 12.5e6, -90.0, -90.0});
  } else {
    throw std::invalid_argument("builtin mask id must be 1..5");
  }
  p.validate();
  return p;
}

MaskSpec build_mask(const MaskProfile& profile, const SystemConfig& cfg,
                    int samples_per_side, double enforce_lo_hz,
                    double enforce_hi_hz) {
  profile.validate();
  if (samples_per_side < 1)
    throw std::invalid_argument("mask: samples_per_side must be positive");
  const double nyquist =
      0.5 * double(cfg.oversampling) * cfg.bandwidth_hz;
  const double lo = enforce_lo_hz > 0.0 ? enforce_lo_hz : profile.f_inactive_hz;
  const double hi = enforce_hi_hz > 0.0 ? enforce_hi_hz : nyquist;
  if (!(lo < hi) || lo < profile.f_inactive_hz || hi > nyquist + 1e-6)
    throw std::invalid_argument(
        "mask: enforcement span must lie within [f_inactive, grid Nyquist]");

  const int n = samples_per_side;
  const int ls = cfg.oversampling * cfg.n_subcarriers;
  const int len = ls + cfg.oversampling * cfg.cp_len;
  const double fs = double(cfg.oversampling) * cfg.bandwidth_hz;

  MaskSpec spec;
  spec.profile = profile;
  spec.samples_per_side = n;
  spec.enforce_lo_hz = lo;
  spec.enforce_hi_hz = hi;
  spec.freq_hz.resize(2 * n);
  spec.r.resize(2 * n);
  spec.gammas.resize(size_t(2 * n));
  for (int j = 0; j < n; ++j) {
    const double f = lo + (hi - lo) * double(j) / double(n);
    const double limit_w_hz =
        dbm_per_100khz_to_w_per_hz(profile.limit_dbm_100khz(f));
    const double cap = double(len) * fs * limit_w_hz;
    // negative side first, mirrored
    spec.freq_hz[j] = -f;
    spec.gammas[size_t(j)] = freq_to_gamma(cfg, -f);
    spec.r[j] = cap;
    spec.freq_hz[n + j] = f;
    spec.gammas[size_t(n + j)] = freq_to_gamma(cfg, f);
    spec.r[n + j] = cap;
  }
  return spec;
}

CxMat spectrum_samples(const CxMat& sampling, const CxMat& weights) {
  return weights * sampling.transpose();
}

RealMat psd_from_spectrum(const CxMat& spectrum, const SystemConfig& cfg) {
  const double len = double(cfg.oversampling) *
                     double(cfg.n_subcarriers + cfg.cp_len);
  const double fs = double(cfg.oversampling) * cfg.bandwidth_hz;
  return spectrum.cwiseAbs2() / (len * fs);
}

std::vector<double> dense_gamma_grid(const SystemConfig& cfg,
                                     int points_per_bin) {
  const int ls = cfg.oversampling * cfg.n_subcarriers;
  const int count = ls * points_per_bin;
  const double start = 0.5 * cfg.n_subcarriers - 0.5 * ls;
  std::vector<double> g(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    g[size_t(i)] = start + double(i) / double(points_per_bin);
  return g;
}

void write_psd_csv(const std::string& path, const SystemConfig& cfg,
                   const std::vector<double>& gammas, const RealMat& psd_w_hz,
                   const MaskProfile& profile) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "freq_hz,psd_dbm_per_100khz,mask_dbm_per_100khz,antenna\n";
  char buf[160];
  for (Eigen::Index a = 0; a < psd_w_hz.rows(); ++a) {
    for (Eigen::Index i = 0; i < psd_w_hz.cols(); ++i) {
      const double f = gamma_to_freq_hz(cfg, gammas[size_t(i)]);
      const double limit = profile.limit_dbm_100khz(f);
      const double psd = w_per_hz_to_dbm_per_100khz(psd_w_hz(a, i));
      if (std::isfinite(limit))
        std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g,%d\n", f, psd, limit,
                      int(a));
      else
        std::snprintf(buf, sizeof buf, "%.10g,%.10g,nan,%d\n", f, psd, int(a));
      out << buf;
    }
  }
}

}  // namespace maskbeam
