#pragma once

// Shared builders for the test suite: deterministic small systems, fabricated
// channels with hand-picked noise levels, and random-matrix utilities.

#include <cstdint>
#include <filesystem>
#include <string>

#include "maskbeam/bcd.hpp"
#include "maskbeam/channel.hpp"
#include "maskbeam/config_io.hpp"
#include "maskbeam/constellation.hpp"
#include "maskbeam/rng.hpp"
#include "maskbeam/spectral.hpp"
#include "maskbeam/types.hpp"

namespace testutil {

using namespace maskbeam;

inline CxMat random_cx(Rng& rng, int rows, int cols) {
  CxMat m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = rng.cnormal();
  return m;
}

inline CxVec random_cxvec(Rng& rng, int n) {
  CxVec v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.cnormal();
  return v;
}

inline CxVec random_unit_phases(Rng& rng, int n) {
  CxVec v(n);
  for (int i = 0; i < n; ++i)
    v[i] = std::polar(1.0, 2.0 * M_PI * rng.uniform());
  return v;
}

/// Channels filled with iid unit-variance entries and a fixed noise power;
/// bypasses the geometric model so tests control every scale.
inline ChannelSet fabricate_channels(const SystemConfig& cfg, Rng rng,
                                     double noise_var) {
  ChannelSet set;
  set.h.resize(size_t(cfg.n_users));
  set.geometry.resize(size_t(cfg.n_users));
  set.noise_var = RealMat::Constant(cfg.n_users, cfg.n_subcarriers, noise_var);
  for (int k = 0; k < cfg.n_users; ++k) {
    set.h[size_t(k)].resize(size_t(cfg.n_subcarriers));
    for (int s = 0; s < cfg.n_subcarriers; ++s)
      set.h[size_t(k)][size_t(s)] = random_cx(rng, cfg.n_rx, cfg.n_tx);
  }
  return set;
}

/// Small but structurally complete system in physical units (fast loops).
inline SystemConfig small_config() {
  SystemConfig cfg;
  cfg.n_tx = 8;
  cfg.n_rf_tx = 4;
  cfg.n_users = 2;
  cfg.n_rx = 2;
  cfg.n_rf_rx = 2;
  cfg.n_streams = 2;
  cfg.n_subcarriers = 8;
  cfg.oversampling = 2;
  cfg.cp_len = 2;
  cfg.batch_size = 3;
  cfg.qam_order = 16;
  cfg.power_budget_w = uniform_budget_w(8, 20.0);
  return cfg;
}

struct SmallProblem {
  SystemConfig cfg;
  AntennaMap map;
  ChannelSet channels;
  MaskSpec mask;
  IdftGrid idft;
  Constellation constellation;
  SymbolBatch batch;
};

/// Full production-path problem at reduced scale: geometric channels with
/// pinned user positions, builtin mask 3, 16-QAM batch.
inline SmallProblem make_small_problem(std::uint64_t seed) {
  SmallProblem p;
  p.cfg = small_config();
  p.map = make_antenna_map(p.cfg);
  ChannelGenConfig gen;
  gen.user_geometry = {{100.0, 0.3, 0.0}, {95.0, -0.4, 0.0}};
  const Rng master(seed);
  p.channels = gen_channels(p.cfg, gen, master.substream(0x11));
  p.mask = build_mask(builtin_mask(3), p.cfg, 6);
  p.idft = build_idft(p.cfg.n_subcarriers, p.cfg.oversampling);
  p.constellation = make_constellation(p.cfg.qam_order);
  p.batch = draw_symbol_batch(p.cfg, p.constellation, master.substream(0x22));
  return p;
}

/// Fresh scratch directory under the system temp root.
inline std::string scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace testutil
