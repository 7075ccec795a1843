#pragma once

#include <string>

#include "maskbeam/types.hpp"

namespace maskbeam {

/// Oversampled inverse-DFT synthesis matrix.
/// f_herm is (l*S) x S with entry [n, s] = exp(j 2 pi n s / (l S)) / sqrt(l S),
/// so its columns are orthonormal and time samples of subcarrier weights w
/// are x = f_herm * w.
struct IdftGrid {
  int n_subcarriers = 0;
  int oversampling = 0;
  CxMat f_herm;
};

IdftGrid build_idft(int n_subcarriers, int oversampling);

/// Frequency response of the CP-extended rectangular pulse train.
///
/// Row i evaluates the length-l(S+cp) symbol (CP included) at fractional bin
/// gamma_i of the oversampled grid: X(gamma_i) = A[i,:] * w.  Entries use the
/// Dirichlet closed form; the removable singularity at gamma - s in l*S*Z is
/// switched to its limit L / sqrt(l S) when the bin offset is within 1e-9 of
/// an integer multiple.
CxMat sampling_matrix(const std::vector<double>& gammas, int n_subcarriers,
                      int oversampling, int cp_len);

/// Piecewise-linear emission limit in dBm per 100 kHz versus the absolute
/// baseband offset |f| from the band centre.  Below f_inactive_hz the limit
/// is infinite (no constraint); past the last segment it stays flat at the
/// last segment's end limit.
struct MaskProfile {
  struct Segment {
    double f_start_hz = 0.0;
    double f_end_hz = 0.0;
    double limit_start_dbm_100khz = 0.0;
    double limit_end_dbm_100khz = 0.0;
  };
  std::string name;
  double f_inactive_hz = 0.0;
  std::vector<Segment> segments;

  double limit_dbm_100khz(double f_abs_hz) const;
  void validate() const;
};

/// Built-in profiles 1..5 (20 MHz channel): 1..4 ramp from
/// {-60,-65,-70,-75} at 10.01 MHz down 10 dB by 12.5 MHz then stay flat;
/// 5 is flat at -90 from 10.01 MHz.
MaskProfile builtin_mask(int id);

/// Sampled mask constraints on the oversampled grid.
///
/// Subcarrier s occupies bin s, so the occupied band is centred on bin S/2;
/// sample frequencies are signed offsets from that centre, mapped to bins via
/// gamma = S/2 + f / (bandwidth / S).  Samples sit at
/// f = lo + (hi-lo) * j/n per side (closed at lo), which makes every n-sample
/// set a subset of its 2n-sample refinement.
struct MaskSpec {
  std::vector<double> gammas;  // fractional bins, size 2*samples_per_side
  RealVec freq_hz;             // signed offsets matching gammas
  RealVec r;                   // cap on |X(gamma_j)|^2
  MaskProfile profile;
  int samples_per_side = 0;
  double enforce_lo_hz = 0.0;
  double enforce_hi_hz = 0.0;
};

MaskSpec build_mask(const MaskProfile& profile, const SystemConfig& cfg,
                    int samples_per_side, double enforce_lo_hz = 0.0,
                    double enforce_hi_hz = 0.0);

/// Per-antenna spectrum samples: row a of the result is (A * w_a)^T where
/// w_a is row a of the subcarrier weight matrix.
CxMat spectrum_samples(const CxMat& sampling, const CxMat& weights);

/// Periodogram scaling |X|^2 / (L * F_s) giving watts per hertz.
RealMat psd_from_spectrum(const CxMat& spectrum, const SystemConfig& cfg);

/// Uniform fractional-bin grid covering one full alias period centred on the
/// occupied band, points_per_bin samples per subcarrier spacing.
std::vector<double> dense_gamma_grid(const SystemConfig& cfg,
                                     int points_per_bin = 8);

inline double bin_spacing_hz(const SystemConfig& cfg) {
  return cfg.bandwidth_hz / double(cfg.n_subcarriers);
}

inline double gamma_to_freq_hz(const SystemConfig& cfg, double gamma) {
  return (gamma - 0.5 * cfg.n_subcarriers) * bin_spacing_hz(cfg);
}

inline double freq_to_gamma(const SystemConfig& cfg, double freq_hz) {
  return 0.5 * cfg.n_subcarriers + freq_hz / bin_spacing_hz(cfg);
}

/// CSV rows (freq_hz, psd_dbm_per_100khz, mask_dbm_per_100khz, antenna); the
/// mask column is NaN where the profile is inactive.
void write_psd_csv(const std::string& path, const SystemConfig& cfg,
                   const std::vector<double>& gammas, const RealMat& psd_w_hz,
                   const MaskProfile& profile);

}  // namespace maskbeam
