
#include "maskbeam/config_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace maskbeam {

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw std::invalid_argument("config." + where + ": " + what);
}

void require_keys(const Json& j, const std::string& section,
                  std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(section, "must be a JSON object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* key : allowed)
      if (item.key() == key) {
        ok = true;
        break;
      }
    if (!ok) fail(section, "unknown key '" + item.key() + "'");
  }
}

template <typename T>
void get_if(const Json& j, const std::string& section, const char* key,
            T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception&) {
    fail(section, std::string("bad value for '") + key + "'");
  }
}

void parse_system(const Json& j, SystemConfig& sys) {
  require_keys(j, "system",
               {"n_tx_antennas", "n_rf_chains_tx", "n_users", "n_rx_antennas",
                "n_rf_chains_rx", "n_streams_per_user", "n_subcarriers",
                "oversampling", "cp_len", "power_budget_per_subcarrier",
                "clip_level", "qam_order", "batch_size", "reg_w", "reg_t",
                "admm_rho", "noise_psd_dbm_hz", "noise_figure_db",
                "carrier_ghz", "bandwidth_hz", "rng_seed"});
  get_if(j, "system", "n_tx_antennas", sys.n_tx);
  get_if(j, "system", "n_rf_chains_tx", sys.n_rf_tx);
  get_if(j, "system", "n_users", sys.n_users);
  get_if(j, "system", "n_rx_antennas", sys.n_rx);
  get_if(j, "system", "n_rf_chains_rx", sys.n_rf_rx);
  get_if(j, "system", "n_streams_per_user", sys.n_streams);
  get_if(j, "system", "n_subcarriers", sys.n_subcarriers);
  get_if(j, "system", "oversampling", sys.oversampling);
  get_if(j, "system", "cp_len", sys.cp_len);
  if (j.contains("power_budget_per_subcarrier")) {
    const Json& p = j.at("power_budget_per_subcarrier");
    if (p.is_number()) {
      sys.power_budget_w.assign(size_t(sys.n_subcarriers), p.get<double>());
    } else if (p.is_array()) {
      sys.power_budget_w = p.get<std::vector<double>>();
    } else {
      fail("system", "power_budget_per_subcarrier must be number or array");
    }
  }
  get_if(j, "system", "clip_level", sys.clip_level);
  get_if(j, "system", "qam_order", sys.qam_order);
  get_if(j, "system", "batch_size", sys.batch_size);
  get_if(j, "system", "reg_w", sys.reg_w);
  get_if(j, "system", "reg_t", sys.reg_t);
  get_if(j, "system", "admm_rho", sys.admm_rho);
  get_if(j, "system", "noise_psd_dbm_hz", sys.noise_psd_dbm_hz);
  get_if(j, "system", "noise_figure_db", sys.noise_figure_db);
  get_if(j, "system", "carrier_ghz", sys.carrier_ghz);
  get_if(j, "system", "bandwidth_hz", sys.bandwidth_hz);
  get_if(j, "system", "rng_seed", sys.seed);
}

void parse_channel(const Json& j, ChannelGenConfig& chan) {
  require_keys(j, "channel",
               {"taps", "rician_k_db", "angle_spread_rad", "disc_radius_m",
                "disc_center_m", "shadow_los_db", "shadow_nlos_db",
                "spacing_over_lambda", "user_geometry"});
  get_if(j, "channel", "taps", chan.taps);
  get_if(j, "channel", "rician_k_db", chan.rician_k_db);
  get_if(j, "channel", "angle_spread_rad", chan.angle_spread_rad);
  get_if(j, "channel", "disc_radius_m", chan.disc_radius_m);
  get_if(j, "channel", "disc_center_m", chan.disc_center_m);
  get_if(j, "channel", "shadow_los_db", chan.shadow_los_db);
  get_if(j, "channel", "shadow_nlos_db", chan.shadow_nlos_db);
  get_if(j, "channel", "spacing_over_lambda", chan.spacing_over_lambda);
  if (j.contains("user_geometry")) {
    const Json& list = j.at("user_geometry");
    if (!list.is_array()) fail("channel", "user_geometry must be an array");
    chan.user_geometry.clear();
    for (const Json& g : list) {
      require_keys(g, "channel.user_geometry",
                   {"distance_m", "aod_rad", "aoa_rad"});
      UserGeometry ug;
      get_if(g, "channel.user_geometry", "distance_m", ug.distance_m);
      get_if(g, "channel.user_geometry", "aod_rad", ug.aod_rad);
      get_if(g, "channel.user_geometry", "aoa_rad", ug.aoa_rad);
      chan.user_geometry.push_back(ug);
    }
  }
}

void parse_mask(const Json& j, ExperimentConfig& cfg) {
  if (j.contains("id")) {
    require_keys(j, "mask", {"id"});
    int id = 0;
    get_if(j, "mask", "id", id);
    if (id < 1 || id > 5) fail("mask", "id must be 1..5");
    cfg.mask_id = id;
    cfg.mask = builtin_mask(id);
    return;
  }
  require_keys(j, "mask", {"name", "f_inactive_hz", "segments"});
  cfg.mask_id = 0;
  cfg.mask = MaskProfile{};
  get_if(j, "mask", "name", cfg.mask.name);
  get_if(j, "mask", "f_inactive_hz", cfg.mask.f_inactive_hz);
  if (!j.contains("segments") || !j.at("segments").is_array())
    fail("mask", "segments array required for a custom profile");
  for (const Json& seg : j.at("segments")) {
    require_keys(seg, "mask.segments",
                 {"f_start_hz", "f_end_hz", "limit_start_dbm_100khz",
                  "limit_end_dbm_100khz"});
    MaskProfile::Segment s;
    get_if(seg, "mask.segments", "f_start_hz", s.f_start_hz);
    get_if(seg, "mask.segments", "f_end_hz", s.f_end_hz);
    get_if(seg, "mask.segments", "limit_start_dbm_100khz",
           s.limit_start_dbm_100khz);
    get_if(seg, "mask.segments", "limit_end_dbm_100khz",
           s.limit_end_dbm_100khz);
    cfg.mask.segments.push_back(s);
  }
}

void parse_run(const Json& j, RunParams& run) {
  require_keys(j, "run",
               {"max_outer", "tol", "n_sweeps", "robust_sigma_e_deg",
                "mask_samples_per_side", "admm_max_iters", "admm_tol_abs",
                "admm_tol_rel", "admm_feas_rel", "noise_draws_ser",
                "phase_error_draws", "points_per_bin", "redraw_symbols",
                "powers_dbm", "sigma_e_deg", "mask_ids"});
  get_if(j, "run", "max_outer", run.max_outer);
  get_if(j, "run", "tol", run.tol);
  get_if(j, "run", "n_sweeps", run.n_sweeps);
  get_if(j, "run", "robust_sigma_e_deg", run.robust_sigma_e_deg);
  get_if(j, "run", "mask_samples_per_side", run.mask_samples_per_side);
  get_if(j, "run", "admm_max_iters", run.admm_max_iters);
  get_if(j, "run", "admm_tol_abs", run.admm_tol_abs);
  get_if(j, "run", "admm_tol_rel", run.admm_tol_rel);
  get_if(j, "run", "admm_feas_rel", run.admm_feas_rel);
  get_if(j, "run", "noise_draws_ser", run.noise_draws_ser);
  get_if(j, "run", "phase_error_draws", run.phase_error_draws);
  get_if(j, "run", "points_per_bin", run.points_per_bin);
  get_if(j, "run", "redraw_symbols", run.redraw_symbols);
  get_if(j, "run", "powers_dbm", run.powers_dbm);
  get_if(j, "run", "sigma_e_deg", run.sigma_e_deg);
  get_if(j, "run", "mask_ids", run.mask_ids);
}

}  // namespace

std::vector<double> uniform_budget_w(int n_subcarriers, double total_dbm) {
  return std::vector<double>(size_t(n_subcarriers),
                             dbm_to_watts(total_dbm) / n_subcarriers);
}

ExperimentConfig default_config() {
  ExperimentConfig cfg;
  cfg.system.power_budget_w =
      uniform_budget_w(cfg.system.n_subcarriers, 20.0);
  cfg.mask = builtin_mask(3);
  cfg.mask_id = 3;
  return cfg;
}

ExperimentConfig config_from_json(const Json& doc) {
  if (!doc.is_object()) fail("", "top level must be a JSON object");
  for (const auto& item : doc.items())
    if (item.key() != "system" && item.key() != "channel" &&
        item.key() != "mask" && item.key() != "run")
      fail("", "unknown section '" + item.key() + "'");

  ExperimentConfig cfg = default_config();
  bool budget_given = false;
  if (doc.contains("system")) {
    budget_given = doc.at("system").contains("power_budget_per_subcarrier");
    parse_system(doc.at("system"), cfg.system);
  }
  if (!budget_given)
    cfg.system.power_budget_w =
        uniform_budget_w(cfg.system.n_subcarriers, 20.0);
  if (doc.contains("channel")) parse_channel(doc.at("channel"), cfg.channel);
  if (doc.contains("mask")) parse_mask(doc.at("mask"), cfg);
  if (doc.contains("run")) parse_run(doc.at("run"), cfg.run);

  try {
    cfg.system.validate();
    cfg.mask.validate();
  } catch (const std::exception& e) {
    throw std::invalid_argument(e.what());
  }
  if (cfg.run.max_outer < 1) fail("run", "max_outer must be >= 1");
  if (cfg.run.mask_samples_per_side < 1)
    fail("run", "mask_samples_per_side must be >= 1");
  if (cfg.run.admm_max_iters < 1) fail("run", "admm_max_iters must be >= 1");
  return cfg;
}

Json config_to_json(const ExperimentConfig& cfg) {
  // A uniform budget is written in its scalar form so a later
  // n_subcarriers override replicates it at the new count.
  Json budget;
  const auto& pw = cfg.system.power_budget_w;
  if (!pw.empty() &&
      std::all_of(pw.begin(), pw.end(),
                  [&](double v) { return v == pw.front(); }))
    budget = pw.front();
  else
    budget = pw;
  Json j;
  j["system"] = {{"n_tx_antennas", cfg.system.n_tx},
                 {"n_rf_chains_tx", cfg.system.n_rf_tx},
                 {"n_users", cfg.system.n_users},
                 {"n_rx_antennas", cfg.system.n_rx},
                 {"n_rf_chains_rx", cfg.system.n_rf_rx},
                 {"n_streams_per_user", cfg.system.n_streams},
                 {"n_subcarriers", cfg.system.n_subcarriers},
                 {"oversampling", cfg.system.oversampling},
                 {"cp_len", cfg.system.cp_len},
                 {"power_budget_per_subcarrier", budget},
                 {"clip_level", cfg.system.clip_level},
                 {"qam_order", cfg.system.qam_order},
                 {"batch_size", cfg.system.batch_size},
                 {"reg_w", cfg.system.reg_w},
                 {"reg_t", cfg.system.reg_t},
                 {"admm_rho", cfg.system.admm_rho},
                 {"noise_psd_dbm_hz", cfg.system.noise_psd_dbm_hz},
                 {"noise_figure_db", cfg.system.noise_figure_db},
                 {"carrier_ghz", cfg.system.carrier_ghz},
                 {"bandwidth_hz", cfg.system.bandwidth_hz},
                 {"rng_seed", cfg.system.seed}};
  Json chan = {{"taps", cfg.channel.taps},
               {"rician_k_db", cfg.channel.rician_k_db},
               {"angle_spread_rad", cfg.channel.angle_spread_rad},
               {"disc_radius_m", cfg.channel.disc_radius_m},
               {"disc_center_m", cfg.channel.disc_center_m},
               {"shadow_los_db", cfg.channel.shadow_los_db},
               {"shadow_nlos_db", cfg.channel.shadow_nlos_db},
               {"spacing_over_lambda", cfg.channel.spacing_over_lambda}};
  if (!cfg.channel.user_geometry.empty()) {
    Json list = Json::array();
    for (const auto& g : cfg.channel.user_geometry)
      list.push_back({{"distance_m", g.distance_m},
                      {"aod_rad", g.aod_rad},
                      {"aoa_rad", g.aoa_rad}});
    chan["user_geometry"] = list;
  }
  j["channel"] = chan;
  if (cfg.mask_id > 0) {
    j["mask"] = {{"id", cfg.mask_id}};
  } else {
    Json segs = Json::array();
    for (const auto& s : cfg.mask.segments)
      segs.push_back({{"f_start_hz", s.f_start_hz},
                      {"f_end_hz", s.f_end_hz},
                      {"limit_start_dbm_100khz", s.limit_start_dbm_100khz},
                      {"limit_end_dbm_100khz", s.limit_end_dbm_100khz}});
    j["mask"] = {{"name", cfg.mask.name},
                 {"f_inactive_hz", cfg.mask.f_inactive_hz},
                 {"segments", segs}};
  }
  j["run"] = {{"max_outer", cfg.run.max_outer},
              {"tol", cfg.run.tol},
              {"n_sweeps", cfg.run.n_sweeps},
              {"robust_sigma_e_deg", cfg.run.robust_sigma_e_deg},
              {"mask_samples_per_side", cfg.run.mask_samples_per_side},
              {"admm_max_iters", cfg.run.admm_max_iters},
              {"admm_tol_abs", cfg.run.admm_tol_abs},
              {"admm_tol_rel", cfg.run.admm_tol_rel},
              {"admm_feas_rel", cfg.run.admm_feas_rel},
              {"noise_draws_ser", cfg.run.noise_draws_ser},
              {"phase_error_draws", cfg.run.phase_error_draws},
              {"points_per_bin", cfg.run.points_per_bin},
              {"redraw_symbols", cfg.run.redraw_symbols},
              {"powers_dbm", cfg.run.powers_dbm},
              {"sigma_e_deg", cfg.run.sigma_e_deg},
              {"mask_ids", cfg.run.mask_ids}};
  return j;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw std::invalid_argument("config: cannot open file '" + path + "'");
  Json doc;
  try {
    in >> doc;
  } catch (const Json::exception& e) {
    throw std::invalid_argument("config: parse error in '" + path +
                                "': " + e.what());
  }
  return config_from_json(doc);
}

void apply_override(Json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw std::invalid_argument("override must look like section.key=value: " +
                                assignment);
  const std::string path = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);

  Json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(
        start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty())
      throw std::invalid_argument("override has an empty path segment: " +
                                  assignment);
    if (dot == std::string::npos) {
      Json parsed = Json::parse(value, nullptr, false);
      if (parsed.is_discarded()) parsed = value;  // plain string
      (*node)[key] = parsed;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t hash = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::uint64_t h = fnv1a64(config_to_json(cfg).dump());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf);
}

std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf);
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot open for writing: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream out;
  out << header << '\n';
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out << ',';
      out << row[i];
    }
    out << '\n';
  }
  write_text_file(path, out.str());
}

void write_meta_sidecar(const std::string& data_path,
                        const ExperimentConfig& cfg, const std::string& command,
                        const std::vector<std::uint64_t>& seeds) {
  std::string base = data_path;
  const std::string ext = ".csv";
  if (base.size() > ext.size() &&
      base.compare(base.size() - ext.size(), ext.size(), ext) == 0)
    base.resize(base.size() - ext.size());
  Json meta;
  meta["command"] = command;
  meta["config_hash"] = config_hash(cfg);
  meta["seeds"] = seeds;
  meta["config"] = config_to_json(cfg);
  write_text_file(base + ".meta.json", meta.dump(2) + "\n");
}

Json bcd_run_to_json(const BcdRun& run) {
  Json j;
  j["objective_trace"] = run.objective_trace;
  j["sum_mse_trace"] = run.mse_trace;
  j["stop_reason"] = run.stop_reason;
  j["inner_converged"] = run.inner_converged;
  j["cycles"] = run.objective_trace.size();
  Json deltas = Json::array();
  for (const auto& d : run.per_block_deltas)
    deltas.push_back({{"combiner_dig", d.combiner_dig},
                      {"transmit", d.transmit},
                      {"rf_tx", d.rf_tx},
                      {"combiner_rf", d.combiner_rf}});
  j["per_block_deltas"] = deltas;
  Json admm = Json::array();
  for (const auto& rep : run.admm_last) {
    Json r = {{"iterations", rep.iterations},
              {"converged", rep.converged},
              {"rho", rep.rho}};
    if (!rep.residual_q.empty()) {
      r["final_residual_q"] = rep.residual_q.back();
      r["final_residual_x"] = rep.residual_x.back();
      r["final_residual_w"] = rep.residual_w.back();
    }
    admm.push_back(r);
  }
  j["admm_last_cycle"] = admm;
  if (!run.mse_trace.empty()) j["final_sum_mse"] = run.mse_trace.back();
  if (!run.objective_trace.empty())
    j["final_objective"] = run.objective_trace.back();
  return j;
}

}  // namespace maskbeam
