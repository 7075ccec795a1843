#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "maskbeam/config_io.hpp"
#include "maskbeam/metrics.hpp"

namespace maskbeam::cli {

/// Parsed command line.
struct ExperimentSpec {
  std::string command;
  std::string config_path;  // empty = built-in defaults
  std::string output_dir = ".";
  std::vector<std::uint64_t> seeds;  // empty = the config's rng_seed
  std::vector<std::string> overrides;
  bool parallel = false;
};

/// Substream tags keeping each consumer on a disjoint Philox stream.
inline constexpr std::uint64_t kStreamChannels = 0x11;
inline constexpr std::uint64_t kStreamSymbols = 0x22;
inline constexpr std::uint64_t kStreamSerNoise = 0x33;
inline constexpr std::uint64_t kStreamPhaseMc = 0x44;
inline constexpr std::uint64_t kStreamRandomPs = 0x55;

/// Config file (or defaults), --set overrides applied, re-validated.
ExperimentConfig resolve_config(const ExperimentSpec& spec);

/// Outer-loop options implied by the run section of a config.
BcdOptions bcd_options(const RunParams& run);

/// One full optimization run plus everything the reports need.
struct PipelineResult {
  ChannelSet channels;
  AntennaMap map;
  MaskSpec mask;
  IdftGrid idft;
  Constellation constellation;
  SymbolBatch batch;
  BcdRun run;
  EmissionReport emissions;
  double sum_mse = 0.0;    // final batch objective
  double objective = 0.0;  // final merit incl. transmit ridge terms
  bool feasible = true;    // power/mask/clip hold at 1e-5 relative slack
  double worst_violation = 0.0;
};

/// Channel and symbol draw, block-coordinate solve, emission integrals and
/// the final feasibility check.  symbol_salt > 0 forks the symbol stream
/// (used by sweeps that redraw the batch per point).
PipelineResult run_pipeline(const ExperimentConfig& cfg, std::uint64_t seed,
                            int symbol_salt = 0);

/// Final chain-domain transmit signals, one matrix per realization.
std::vector<CxMat> transmit_stack(const BcdRun& run);

int cmd_run(const ExperimentSpec& spec);
int cmd_sweep_power(const ExperimentSpec& spec);
int cmd_sweep_mask(const ExperimentSpec& spec);
int cmd_compare_baselines(const ExperimentSpec& spec);
int cmd_robust_eval(const ExperimentSpec& spec);
int cmd_psd_export(const ExperimentSpec& spec);
int cmd_convergence(const ExperimentSpec& spec);

/// Argument parsing and dispatch. Exit codes: 0 success, 1 transmit
/// constraints violated at output, 2 usage or config error.
int cli_main(int argc, char** argv);

}  // namespace maskbeam::cli
