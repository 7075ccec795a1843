#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <thread>

#include <CLI11.hpp>

namespace maskbeam::cli {
namespace {

// Relative slack allowed on the transmit constraints of a finished run.
constexpr double kOutputSlack = 1e-5;

std::vector<std::uint64_t> effective_seeds(const ExperimentSpec& spec,
                                           const ExperimentConfig& cfg) {
  if (!spec.seeds.empty()) return spec.seeds;
  return {cfg.system.seed};
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Runs body(0..n-1), optionally fanned out one thread per task; the first
/// captured exception is rethrown after all tasks finish.
void run_tasks(int n, bool parallel, const std::function<void(int)>& body) {
  if (!parallel || n <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  pool.reserve(n);
  for (int i = 0; i < n; ++i) {
    pool.emplace_back([&, i] {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

ExperimentConfig resolve_config(const ExperimentSpec& spec) {
  Json doc;
  if (spec.config_path.empty()) {
    doc = config_to_json(default_config());
  } else {
    std::ifstream in(spec.config_path);
    if (!in) throw std::invalid_argument("config: cannot open " + spec.config_path);
    try {
      doc = Json::parse(in);
    } catch (const Json::exception& e) {
      throw std::invalid_argument("config: " + std::string(e.what()));
    }
  }
  for (const auto& assignment : spec.overrides) apply_override(doc, assignment);
  return config_from_json(doc);
}

BcdOptions bcd_options(const RunParams& run) {
  BcdOptions o;
  o.max_outer = run.max_outer;
  o.tol = run.tol;
  o.n_sweeps = run.n_sweeps;
  o.robust_sigma_e = run.robust_sigma_e_deg * M_PI / 180.0;
  o.admm.tol_abs = run.admm_tol_abs;
  o.admm.tol_rel = run.admm_tol_rel;
  o.admm.feas_rel = run.admm_feas_rel;
  o.admm.max_iters = run.admm_max_iters;
  return o;
}

std::vector<CxMat> transmit_stack(const BcdRun& run) {
  std::vector<CxMat> t;
  t.reserve(run.tx.size());
  for (const auto& state : run.tx) t.push_back(state.t);
  return t;
}

PipelineResult run_pipeline(const ExperimentConfig& cfg, std::uint64_t seed,
                            int symbol_salt) {
  cfg.system.validate();
  cfg.mask.validate();
  PipelineResult out;
  const Rng master(seed);
  out.map = make_antenna_map(cfg.system);
  out.channels =
      gen_channels(cfg.system, cfg.channel, master.substream(kStreamChannels));
  out.constellation = make_constellation(cfg.system.qam_order);
  Rng sym_rng = master.substream(kStreamSymbols);
  if (symbol_salt > 0) sym_rng = sym_rng.substream(std::uint64_t(symbol_salt));
  out.batch = draw_symbol_batch(cfg.system, out.constellation, sym_rng);
  out.idft = build_idft(cfg.system.n_subcarriers, cfg.system.oversampling);
  out.mask = build_mask(cfg.mask, cfg.system, cfg.run.mask_samples_per_side);

  out.run = run_bcd(cfg.system, out.channels, out.mask, out.idft, out.batch.sym,
                    bcd_options(cfg.run));
  if (out.run.objective_trace.empty())
    throw std::logic_error("pipeline: optimizer produced no cycles");

  const std::vector<CxMat> t = transmit_stack(out.run);
  out.emissions =
      emission_report(cfg.system, antenna_domain(out.map, t, out.run.v_ps),
                      out.mask, cfg.run.points_per_bin);
  out.sum_mse = out.run.mse_trace.back();
  out.objective = out.run.objective_trace.back();
  out.worst_violation = -std::numeric_limits<double>::infinity();
  for (const auto& tb : t) {
    double worst = 0.0;
    const bool ok = transmit_feasible(cfg.system, out.map, out.mask, out.idft,
                                      tb, kOutputSlack, &worst);
    out.feasible = out.feasible && ok;
    out.worst_violation = std::max(out.worst_violation, worst);
  }
  return out;
}

int cmd_run(const ExperimentSpec& spec) {
  const ExperimentConfig cfg = resolve_config(spec);
  const auto seeds = effective_seeds(spec, cfg);
  const std::uint64_t seed = seeds.front();
  const PipelineResult pr = run_pipeline(cfg, seed);
  std::filesystem::create_directories(spec.output_dir);

  Json run_doc = bcd_run_to_json(pr.run);
  run_doc["seed"] = seed;
  run_doc["config_hash"] = config_hash(cfg);
  run_doc["feasible"] = pr.feasible;
  write_text_file(join_path(spec.output_dir, "run.json"), run_doc.dump(2) + "\n");

  const std::vector<CxMat> t = transmit_stack(pr.run);
  const RealVec mse = per_subcarrier_mse(cfg.system, pr.channels, pr.map, t,
                                         pr.run.v_ps, pr.run.rx, pr.batch.sym);
  std::vector<std::vector<std::string>> mse_rows;
  for (int s = 0; s < mse.size(); ++s)
    mse_rows.push_back({std::to_string(s), format_g17(mse[s])});
  const std::string mse_path = join_path(spec.output_dir, "mse.csv");
  write_csv(mse_path, "subcarrier,mse", mse_rows);
  write_meta_sidecar(mse_path, cfg, "run", {seed});

  const std::string psd_path = join_path(spec.output_dir, "psd.csv");
  write_psd_csv(psd_path, cfg.system, pr.emissions.gammas, pr.emissions.psd_w_hz,
                cfg.mask);
  write_meta_sidecar(psd_path, cfg, "run", {seed});

  Json em;
  em["inband_dbm"] = pr.emissions.inband_dbm;
  em["oob_dbm"] = pr.emissions.oob_dbm;
  em["worst_mask_margin_db"] = pr.emissions.worst_mask_margin_db;
  em["feasible"] = pr.feasible;
  em["worst_violation"] = pr.worst_violation;
  write_text_file(join_path(spec.output_dir, "emissions.json"),
                  em.dump(2) + "\n");

  Rng ser_rng = Rng(seed).substream(kStreamSerNoise);
  const RealVec ser = symbol_error_rate(
      cfg.system, pr.channels, pr.map, t, pr.run.v_ps, pr.run.rx, pr.batch,
      pr.constellation, cfg.run.noise_draws_ser, ser_rng);
  std::vector<std::vector<std::string>> ser_rows;
  for (int s = 0; s < ser.size(); ++s)
    ser_rows.push_back({std::to_string(s), format_g17(ser[s]),
                        std::to_string(cfg.system.qam_order)});
  const std::string ser_path = join_path(spec.output_dir, "ser.csv");
  write_csv(ser_path, "subcarrier,ser,qam_order", ser_rows);
  write_meta_sidecar(ser_path, cfg, "run", {seed});

  const RealMat e = evm(cfg.system, pr.channels, pr.map, t, pr.run.v_ps,
                        pr.run.rx, pr.batch.sym);
  std::vector<std::vector<std::string>> evm_rows;
  for (int s = 0; s < e.cols(); ++s)
    for (int k = 0; k < e.rows(); ++k)
      evm_rows.push_back(
          {std::to_string(s), std::to_string(k), format_g17(e(k, s))});
  const std::string evm_path = join_path(spec.output_dir, "evm.csv");
  write_csv(evm_path, "subcarrier,user,evm", evm_rows);
  write_meta_sidecar(evm_path, cfg, "run", {seed});

  return pr.feasible ? 0 : 1;
}

int cmd_sweep_power(const ExperimentSpec& spec) {
  const ExperimentConfig cfg = resolve_config(spec);
  const auto seeds = effective_seeds(spec, cfg);
  const std::vector<double>& powers = cfg.run.powers_dbm;
  if (powers.empty()) throw std::invalid_argument("run.powers_dbm: empty sweep");
  const int np = int(powers.size());
  const int ns = int(seeds.size());

  struct Cell {
    double mse = 0, oob = 0, inband = 0;
    bool feasible = true;
  };
  std::vector<Cell> cells(std::size_t(np) * ns);
  run_tasks(np * ns, spec.parallel, [&](int idx) {
    const int p = idx / ns;
    const int si = idx % ns;
    ExperimentConfig point = cfg;
    point.system.power_budget_w =
        uniform_budget_w(cfg.system.n_subcarriers, powers[p]);
    const PipelineResult pr =
        run_pipeline(point, seeds[si], cfg.run.redraw_symbols ? p + 1 : 0);
    cells[idx] = {pr.sum_mse / cfg.system.n_subcarriers, pr.emissions.oob_dbm,
                  pr.emissions.inband_dbm, pr.feasible};
  });

  bool all_ok = true;
  std::vector<std::vector<std::string>> rows;
  for (int p = 0; p < np; ++p) {
    std::vector<double> m, o, i;
    for (int si = 0; si < ns; ++si) {
      const Cell& c = cells[std::size_t(p) * ns + si];
      m.push_back(c.mse);
      o.push_back(c.oob);
      i.push_back(c.inband);
      all_ok = all_ok && c.feasible;
    }
    rows.push_back({format_g17(powers[p]), format_g17(median(m)),
                    format_g17(median(o)), format_g17(median(i))});
  }
  std::filesystem::create_directories(spec.output_dir);
  const std::string path = join_path(spec.output_dir, "sweep.csv");
  write_csv(path, "power_dbm,avg_sum_mse,oob_dbm,inband_dbm", rows);
  write_meta_sidecar(path, cfg, "sweep-power", seeds);
  return all_ok ? 0 : 1;
}

int cmd_sweep_mask(const ExperimentSpec& spec) {
  const ExperimentConfig cfg = resolve_config(spec);
  const auto seeds = effective_seeds(spec, cfg);
  const std::vector<int>& ids = cfg.run.mask_ids;
  if (ids.empty()) throw std::invalid_argument("run.mask_ids: empty sweep");
  const int np = int(ids.size());
  const int ns = int(seeds.size());

  struct Cell {
    double mse = 0, oob = 0, inband = 0;
    bool feasible = true;
  };
  std::vector<Cell> cells(std::size_t(np) * ns);
  run_tasks(np * ns, spec.parallel, [&](int idx) {
    const int p = idx / ns;
    const int si = idx % ns;
    ExperimentConfig point = cfg;
    point.mask = builtin_mask(ids[p]);
    point.mask_id = ids[p];
    const PipelineResult pr =
        run_pipeline(point, seeds[si], cfg.run.redraw_symbols ? p + 1 : 0);
    cells[idx] = {pr.sum_mse / cfg.system.n_subcarriers, pr.emissions.oob_dbm,
                  pr.emissions.inband_dbm, pr.feasible};
  });

  bool all_ok = true;
  std::vector<std::vector<std::string>> rows;
  for (int p = 0; p < np; ++p) {
    std::vector<double> m, o, i;
    for (int si = 0; si < ns; ++si) {
      const Cell& c = cells[std::size_t(p) * ns + si];
      m.push_back(c.mse);
      o.push_back(c.oob);
      i.push_back(c.inband);
      all_ok = all_ok && c.feasible;
    }
    rows.push_back({std::to_string(ids[p]), format_g17(median(o)),
                    format_g17(median(i)), format_g17(median(m))});
  }
  std::filesystem::create_directories(spec.output_dir);
  const std::string path = join_path(spec.output_dir, "mask_sweep.csv");
  write_csv(path, "mask_id,oob_dbm,inband_dbm,avg_sum_mse", rows);
  write_meta_sidecar(path, cfg, "sweep-mask", seeds);
  return all_ok ? 0 : 1;
}

int cmd_compare_baselines(const ExperimentSpec& spec) {
  const ExperimentConfig cfg = resolve_config(spec);
  const auto seeds = effective_seeds(spec, cfg);
  const int ns = int(seeds.size());
  const std::vector<std::string> methods = {"proposed",  "zf",        "mrt",
                                            "zf_notch",  "mrt_notch", "random_ps"};
  const int nm = int(methods.size());

  struct Cell {
    double mse = 0, oob = 0, margin = 0;
  };
  std::vector<Cell> cells(std::size_t(nm) * ns);
  std::vector<char> feasible(ns, 1);
  run_tasks(ns, spec.parallel, [&](int si) {
    const std::uint64_t seed = seeds[si];
    const double s_count = cfg.system.n_subcarriers;
    const PipelineResult pr = run_pipeline(cfg, seed);
    feasible[si] = pr.feasible ? 1 : 0;
    cells[std::size_t(0) * ns + si] = {pr.sum_mse / s_count,
                                       pr.emissions.oob_dbm,
                                       pr.emissions.worst_mask_margin_db};
    for (int mi = 1; mi <= 4; ++mi) {
      const BaselineOutcome bo =
          eval_digital_baseline(cfg.system, pr.channels, pr.mask, pr.batch.sym,
                                methods[mi], cfg.run.points_per_bin);
      cells[std::size_t(mi) * ns + si] = {bo.avg_sum_mse, bo.oob_dbm,
                                          bo.worst_mask_margin_db};
    }
    Rng ps_rng = Rng(seed).substream(kStreamRandomPs);
    const BcdRun rps =
        run_random_ps_baseline(cfg.system, pr.channels, pr.mask, pr.idft,
                               pr.batch.sym, bcd_options(cfg.run), ps_rng);
    const std::vector<CxMat> t = transmit_stack(rps);
    const EmissionReport em =
        emission_report(cfg.system, antenna_domain(pr.map, t, rps.v_ps),
                        pr.mask, cfg.run.points_per_bin);
    cells[std::size_t(5) * ns + si] = {rps.mse_trace.back() / s_count,
                                       em.oob_dbm, em.worst_mask_margin_db};
  });

  std::vector<std::vector<std::string>> rows;
  for (int mi = 0; mi < nm; ++mi) {
    std::vector<double> m, o, g;
    for (int si = 0; si < ns; ++si) {
      const Cell& c = cells[std::size_t(mi) * ns + si];
      m.push_back(c.mse);
      o.push_back(c.oob);
      g.push_back(c.margin);
    }
    rows.push_back({methods[mi], format_g17(median(m)), format_g17(median(o)),
                    format_g17(median(g))});
  }
  std::filesystem::create_directories(spec.output_dir);
  const std::string path = join_path(spec.output_dir, "baselines.csv");
  write_csv(path, "method,avg_sum_mse,oob_dbm,worst_mask_margin_db", rows);
  write_meta_sidecar(path, cfg, "compare-baselines", seeds);
  return std::all_of(feasible.begin(), feasible.end(), [](char f) { return f; })
             ? 0
             : 1;
}

int cmd_robust_eval(const ExperimentSpec& spec) {
  const ExperimentConfig cfg = resolve_config(spec);
  const auto seeds = effective_seeds(spec, cfg);
  const std::vector<double>& sigmas = cfg.run.sigma_e_deg;
  if (sigmas.empty()) throw std::invalid_argument("run.sigma_e_deg: empty sweep");
  const int np = int(sigmas.size());
  const int ns = int(seeds.size());

  struct Cell {
    double nominal = 0, robust = 0;
    bool feasible = true;
  };
  std::vector<Cell> cells(std::size_t(np) * ns);
  run_tasks(ns, spec.parallel, [&](int si) {
    const std::uint64_t seed = seeds[si];
    ExperimentConfig nom_cfg = cfg;
    nom_cfg.run.robust_sigma_e_deg = 0.0;
    const PipelineResult nom = run_pipeline(nom_cfg, seed);
    const std::vector<CxMat> t_nom = transmit_stack(nom.run);
    for (int p = 0; p < np; ++p) {
      ExperimentConfig rob_cfg = cfg;
      rob_cfg.run.robust_sigma_e_deg = sigmas[p];
      const PipelineResult rob = run_pipeline(rob_cfg, seed);
      const std::vector<CxMat> t_rob = transmit_stack(rob.run);
      const double srad = sigmas[p] * M_PI / 180.0;
      // Paired evaluation: both designs see identical error draws.
      const Rng base =
          Rng(seed).substream(kStreamPhaseMc).substream(std::uint64_t(p));
      Rng r_nom = base;
      Rng r_rob = base;
      Cell c;
      c.nominal = phase_error_objective(cfg.system, nom.channels, nom.map,
                                        t_nom, nom.run.v_ps, nom.run.rx,
                                        nom.batch.sym, srad,
                                        cfg.run.phase_error_draws, r_nom);
      c.robust = phase_error_objective(cfg.system, rob.channels, rob.map,
                                       t_rob, rob.run.v_ps, rob.run.rx,
                                       rob.batch.sym, srad,
                                       cfg.run.phase_error_draws, r_rob);
      c.feasible = nom.feasible && rob.feasible;
      cells[std::size_t(p) * ns + si] = c;
    }
  });

  bool all_ok = true;
  std::vector<std::vector<std::string>> rows;
  for (int p = 0; p < np; ++p) {
    std::vector<double> vn, vr;
    for (int si = 0; si < ns; ++si) {
      const Cell& c = cells[std::size_t(p) * ns + si];
      vn.push_back(c.nominal);
      vr.push_back(c.robust);
      all_ok = all_ok && c.feasible;
    }
    rows.push_back({format_g17(sigmas[p]), format_g17(median(vn)),
                    format_g17(median(vr))});
  }
  std::filesystem::create_directories(spec.output_dir);
  const std::string path = join_path(spec.output_dir, "robust.csv");
  write_csv(path, "sigma_e_deg,mse_nominal,mse_robust", rows);
  write_meta_sidecar(path, cfg, "robust-eval", seeds);
  return all_ok ? 0 : 1;
}

int cmd_psd_export(const ExperimentSpec& spec) {
  const ExperimentConfig cfg = resolve_config(spec);
  const auto seeds = effective_seeds(spec, cfg);
  const PipelineResult pr = run_pipeline(cfg, seeds.front());
  std::filesystem::create_directories(spec.output_dir);
  const std::string path = join_path(spec.output_dir, "psd.csv");
  write_psd_csv(path, cfg.system, pr.emissions.gammas, pr.emissions.psd_w_hz,
                cfg.mask);
  write_meta_sidecar(path, cfg, "psd-export", {seeds.front()});
  return pr.feasible ? 0 : 1;
}

int cmd_convergence(const ExperimentSpec& spec) {
  const ExperimentConfig cfg = resolve_config(spec);
  const auto seeds = effective_seeds(spec, cfg);
  const PipelineResult pr = run_pipeline(cfg, seeds.front());
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < pr.run.objective_trace.size(); ++i)
    rows.push_back({std::to_string(i + 1),
                    format_g17(pr.run.objective_trace[i]),
                    format_g17(pr.run.mse_trace[i])});
  std::filesystem::create_directories(spec.output_dir);
  const std::string path = join_path(spec.output_dir, "convergence.csv");
  write_csv(path, "cycle,objective,sum_mse", rows);
  write_meta_sidecar(path, cfg, "convergence", {seeds.front()});
  return pr.feasible ? 0 : 1;
}

int cli_main(int argc, char** argv) {
  CLI::App app{"Mask-compliant wideband hybrid precoding experiments",
               "maskbeam"};
  app.require_subcommand(1);

  ExperimentSpec spec;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"run", "one full run: run.json, mse/psd/ser/evm CSVs, emissions.json"},
      {"sweep-power", "MSE and emissions across total power budgets"},
      {"sweep-mask", "MSE and emissions across the built-in masks"},
      {"compare-baselines", "proposed vs ZF/MRT (plain and notched), random PS"},
      {"robust-eval", "nominal vs robust designs under phase errors"},
      {"psd-export", "dense PSD curves with the mask overlay"},
      {"convergence", "outer-loop objective trace"},
  };
  for (const auto& [name, desc] : commands) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", spec.config_path,
                    "JSON config file (defaults used when absent)");
    sub->add_option("--out", spec.output_dir, "output directory")
        ->capture_default_str();
    sub->add_option("--seed", spec.seeds, "seed or comma-separated seed list")
        ->delimiter(',');
    sub->add_option("--set", spec.overrides,
                    "config override as dotted.path=value (repeatable)");
    sub->add_flag("--parallel", spec.parallel,
                  "fan sweep points out across threads");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  spec.command = app.get_subcommands().front()->get_name();

  try {
    if (spec.command == "run") return cmd_run(spec);
    if (spec.command == "sweep-power") return cmd_sweep_power(spec);
    if (spec.command == "sweep-mask") return cmd_sweep_mask(spec);
    if (spec.command == "compare-baselines") return cmd_compare_baselines(spec);
    if (spec.command == "robust-eval") return cmd_robust_eval(spec);
    if (spec.command == "psd-export") return cmd_psd_export(spec);
    if (spec.command == "convergence") return cmd_convergence(spec);
    std::cerr << "unknown command: " << spec.command << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace maskbeam::cli
