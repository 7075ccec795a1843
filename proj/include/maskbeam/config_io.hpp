#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "maskbeam/bcd.hpp"
#include "maskbeam/channel.hpp"
#include "maskbeam/spectral.hpp"
#include "maskbeam/types.hpp"

namespace maskbeam {

using Json = nlohmann::json;

/// Experiment-level knobs (the "run" config section).
struct RunParams {
  int max_outer = 50;
  double tol = 1e-5;
  int n_sweeps = 5;
  double robust_sigma_e_deg = 0.0;
  int mask_samples_per_side = 16;
  int admm_max_iters = 2000;
  double admm_tol_abs = 1e-8;
  double admm_tol_rel = 1e-6;
  double admm_feas_rel = 1e-5;
  int noise_draws_ser = 200;
  int phase_error_draws = 50;
  int points_per_bin = 8;
  bool redraw_symbols = false;  // fresh symbol batch per sweep point
  std::vector<double> powers_dbm{10.0, 15.0, 20.0, 25.0, 30.0};
  std::vector<double> sigma_e_deg{3.0, 6.0, 9.0};
  std::vector<int> mask_ids{1, 2, 3, 4, 5};
};

struct ExperimentConfig {
  SystemConfig system;
  ChannelGenConfig channel;
  MaskProfile mask;
  int mask_id = 3;  // 0 = custom profile given inline
  RunParams run;
};

/// Uniform per-subcarrier split of a total budget given in dBm.
std::vector<double> uniform_budget_w(int n_subcarriers, double total_dbm);

/// Desk-scale defaults: builtin mask 3 and a 20 dBm total budget.
ExperimentConfig default_config();

/// Parses the composite {"system","channel","mask","run"} document. Unknown
/// keys in any section throw std::invalid_argument naming the key; so do
/// type mismatches and failed validation.
ExperimentConfig config_from_json(const Json& doc);
Json config_to_json(const ExperimentConfig& cfg);

/// Reads and parses a config file; std::invalid_argument on any failure.
ExperimentConfig load_config_file(const std::string& path);

/// Applies one "dotted.path=json_value" override to a config document,
/// creating intermediate objects; the value is parsed as JSON and falls back
/// to a plain string.
void apply_override(Json& doc, const std::string& assignment);

std::uint64_t fnv1a64(const std::string& bytes);

/// 16-hex-digit FNV-1a hash of the canonical (sorted-key) config dump.
std::string config_hash(const ExperimentConfig& cfg);

/// Shortest round-trippable decimal form (%.17g).
std::string format_g17(double v);

void write_text_file(const std::string& path, const std::string& content);

/// Header plus preformatted rows, comma-joined.
void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::vector<std::string>>& rows);

/// "<base>.meta.json" next to a data file: command, seeds, config hash and
/// the resolved config itself.
void write_meta_sidecar(const std::string& data_path,
                        const ExperimentConfig& cfg, const std::string& command,
                        const std::vector<std::uint64_t>& seeds);

Json bcd_run_to_json(const BcdRun& run);

}  // namespace maskbeam
