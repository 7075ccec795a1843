#pragma once

#include "maskbeam/rng.hpp"
#include "maskbeam/types.hpp"

namespace maskbeam {

/// Square QAM table indexed by the transmitted bit pattern.
/// Points are scaled so the table's mean energy is exactly one.
struct Constellation {
  int order = 0;
  CxVec points;
};

/// Gray-coded square QAM for order in {4, 16, 64, 256}.
Constellation make_constellation(int order);

/// Nearest constellation point by Euclidean distance.
/// Ties resolve to the smallest point index, so decisions are deterministic.
int qam_decide(const Constellation& c, cxd z);

/// One drawn batch of stream symbols: sym[b][k] is n_streams x n_subcarriers,
/// idx holds the matching constellation indices for error counting.
struct SymbolBatch {
  std::vector<std::vector<CxMat>> sym;
  std::vector<std::vector<Eigen::MatrixXi>> idx;
};

SymbolBatch draw_symbol_batch(const SystemConfig& cfg, const Constellation& c,
                              const Rng& rng);

}  // namespace maskbeam
