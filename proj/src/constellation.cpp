#include "maskbeam/constellation.hpp"

#include <stdexcept>

namespace maskbeam {

namespace {
// Position of a gray code g within the 0..m-1 level ordering.
int gray_to_position(int g) {
  int p = 0;
  while (g) {
    p ^= g;
    g >>= 1;
  }
  return p;
}
}  // namespace

Constellation make_constellation(int order) {
  if (order != 4 && order != 16 && order != 64 && order != 256)
    throw std::invalid_argument("constellation order must be 4, 16, 64 or 256");
  const int m = int(std::lround(std::sqrt(double(order))));
  int bits_per_axis = 0;
  while ((1 << bits_per_axis) < m) ++bits_per_axis;

  // Odd-integer PAM levels, then a global scale making mean energy exactly 1:
  // per axis E = (m^2 - 1)/3, complex total 2(m^2 - 1)/3.
  const double scale = std::sqrt(3.0 / (2.0 * (double(m) * m - 1.0)));
  Constellation c;
  c.order = order;
  c.points.resize(order);
  for (int i = 0; i < order; ++i) {
    const int gi = i >> bits_per_axis;       // in-phase bits
    const int gq = i & (m - 1);              // quadrature bits
    const int pi = gray_to_position(gi);
    const int pq = gray_to_position(gq);
    const double re = double(2 * pi - (m - 1)) * scale;
    const double im = double(2 * pq - (m - 1)) * scale;
    c.points[i] = cxd(re, im);
  }
  return c;
}

int qam_decide(const Constellation& c, cxd z) {
  int best = 0;
  double best_d = std::norm(z - c.points[0]);
  for (int i = 1; i < c.order; ++i) {
    const double d = std::norm(z - c.points[i]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

SymbolBatch draw_symbol_batch(const SystemConfig& cfg, const Constellation& c,
                              const Rng& rng) {
  SymbolBatch batch;
  batch.sym.resize(cfg.batch_size);
  batch.idx.resize(cfg.batch_size);
  for (int b = 0; b < cfg.batch_size; ++b) {
    Rng rb = rng.substream(b);
    batch.sym[b].resize(cfg.n_users);
    batch.idx[b].resize(cfg.n_users);
    for (int k = 0; k < cfg.n_users; ++k) {
      Rng rk = rb.substream(k);
      CxMat w(cfg.n_streams, cfg.n_subcarriers);
      Eigen::MatrixXi id(cfg.n_streams, cfg.n_subcarriers);
      for (int s = 0; s < cfg.n_subcarriers; ++s)
        for (int j = 0; j < cfg.n_streams; ++j) {
          const int i = int(rk.uniform() * c.order);
          id(j, s) = i;
          w(j, s) = c.points[i];
        }
      batch.sym[b][k] = std::move(w);
      batch.idx[b][k] = std::move(id);
    }
  }
  return batch;
}

}  // namespace maskbeam
