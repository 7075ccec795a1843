#include <doctest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "maskbeam/bcd.hpp"

using namespace maskbeam;
using testutil::random_cx;
using testutil::random_unit_phases;

namespace {

struct Eval {
  std::vector<CxMat> t_per_b;
  std::vector<CxVec> v_per_b;
  std::vector<std::vector<CxMat>> symbols;
};

Eval random_eval_point(const SystemConfig& cfg, std::uint64_t seed) {
  Eval e;
  Rng rng(seed);
  e.t_per_b.resize(size_t(cfg.batch_size));
  e.v_per_b.resize(size_t(cfg.batch_size));
  e.symbols.resize(size_t(cfg.batch_size));
  for (int b = 0; b < cfg.batch_size; ++b) {
    e.t_per_b[size_t(b)] = random_cx(rng, cfg.n_rf_tx, cfg.n_subcarriers);
    e.v_per_b[size_t(b)] = random_unit_phases(rng, cfg.n_tx);
    e.symbols[size_t(b)].resize(size_t(cfg.n_users));
    for (int k = 0; k < cfg.n_users; ++k)
      e.symbols[size_t(b)][size_t(k)] =
          random_cx(rng, cfg.n_streams, cfg.n_subcarriers);
  }
  return e;
}

}  // namespace

TEST_CASE("objective with zero transmit reduces to symbol plus noise energy") {
  SystemConfig cfg = testutil::small_config();
  const AntennaMap map = make_antenna_map(cfg);
  const double nv = 0.03;
  const ChannelSet channels = testutil::fabricate_channels(cfg, Rng(1), nv);
  Eval e = random_eval_point(cfg, 2);
  for (auto& t : e.t_per_b) t.setZero();
  const RxState rx = init_rx_state(cfg);

  double expect = 0.0;
  for (int b = 0; b < cfg.batch_size; ++b)
    for (int k = 0; k < cfg.n_users; ++k)
      expect += e.symbols[size_t(b)][size_t(k)].squaredNorm();
  expect /= cfg.batch_size;
  for (int k = 0; k < cfg.n_users; ++k)
    for (int s = 0; s < cfg.n_subcarriers; ++s)
      expect += nv * (rx.u_rf[size_t(k)] * rx.u_dig[size_t(k)][size_t(s)])
                         .squaredNorm();

  const double got = evaluate_objective(cfg, channels, map, e.t_per_b,
                                        e.v_per_b, rx, e.symbols);
  CHECK(got == doctest::Approx(expect).epsilon(1e-12));

  // The per-(user,subcarrier) split adds up to the same number.
  const RealMat mse = user_subcarrier_mse(cfg, channels, map, e.t_per_b,
                                          e.v_per_b, rx, e.symbols);
  CHECK(mse.sum() == doctest::Approx(got).epsilon(1e-12));
  CHECK((mse.array() >= 0.0).all());
}

TEST_CASE("a perfect noiseless scalar chain reaches zero objective") {
  SystemConfig cfg;
  cfg.n_tx = 1;
  cfg.n_rf_tx = 1;
  cfg.n_users = 1;
  cfg.n_rx = 1;
  cfg.n_rf_rx = 1;
  cfg.n_streams = 1;
  cfg.n_subcarriers = 2;
  cfg.oversampling = 2;
  cfg.cp_len = 1;
  cfg.batch_size = 2;
  cfg.power_budget_w = {1.0, 1.0};
  const AntennaMap map = make_antenna_map(cfg);

  ChannelSet channels;
  channels.h = {{CxMat::Ones(1, 1), CxMat::Ones(1, 1)}};
  channels.noise_var = RealMat::Zero(1, 2);
  channels.geometry.resize(1);

  Eval e = random_eval_point(cfg, 3);
  for (int b = 0; b < cfg.batch_size; ++b) {
    e.v_per_b[size_t(b)] = CxVec::Ones(1);
    e.t_per_b[size_t(b)] = e.symbols[size_t(b)][0];  // t = omega through h = 1
  }
  const RxState rx = init_rx_state(cfg);
  const double j = evaluate_objective(cfg, channels, map, e.t_per_b,
                                      e.v_per_b, rx, e.symbols);
  CHECK(j == 0.0);
}

TEST_CASE("objective agrees with a monte-carlo noise average") {
  SystemConfig cfg = testutil::small_config();
  cfg.batch_size = 2;
  const AntennaMap map = make_antenna_map(cfg);
  const double nv = 0.05;
  const ChannelSet channels = testutil::fabricate_channels(cfg, Rng(4), nv);
  const Eval e = random_eval_point(cfg, 5);
  RxState rx = init_rx_state(cfg);
  Rng rmix(6);
  for (int k = 0; k < cfg.n_users; ++k) {
    rx.u_rf[size_t(k)] = random_cx(rmix, cfg.n_rx, cfg.n_rf_rx);
    for (int s = 0; s < cfg.n_subcarriers; ++s)
      rx.u_dig[size_t(k)][size_t(s)] =
          random_cx(rmix, cfg.n_rf_rx, cfg.n_streams);
  }

  const double j = evaluate_objective(cfg, channels, map, e.t_per_b,
                                      e.v_per_b, rx, e.symbols);

  Rng noise(7);
  const int draws = 20000;
  double mean = 0.0, m2 = 0.0;
  const double sigma = std::sqrt(nv);
  for (int d = 1; d <= draws; ++d) {
    double val = 0.0;
    for (int b = 0; b < cfg.batch_size; ++b)
      for (int s = 0; s < cfg.n_subcarriers; ++s) {
        CxVec x(cfg.n_tx);
        for (int a = 0; a < cfg.n_tx; ++a)
          x[a] = e.v_per_b[size_t(b)][a] *
                 e.t_per_b[size_t(b)](map.chain_of[size_t(a)], s);
        for (int k = 0; k < cfg.n_users; ++k) {
          CxVec rxsig = channels.h[size_t(k)][size_t(s)] * x;
          for (int r = 0; r < cfg.n_rx; ++r) rxsig[r] += sigma * noise.cnormal();
          const CxVec shat = rx.u_dig[size_t(k)][size_t(s)].adjoint() *
                             (rx.u_rf[size_t(k)].adjoint() * rxsig);
          val += (shat - e.symbols[size_t(b)][size_t(k)].col(s)).squaredNorm();
        }
      }
    val /= cfg.batch_size;
    const double delta = val - mean;
    mean += delta / d;
    m2 += delta * (val - mean);
  }
  const double se = std::sqrt(m2 / (double(draws) - 1.0) / double(draws));
  CHECK(std::abs(mean - j) <= 6.0 * se + 1e-9);
}

TEST_CASE("block loop bookkeeping is complete and the merit descends") {
  testutil::SmallProblem p = testutil::make_small_problem(11);
  BcdOptions opts;
  opts.max_outer = 4;
  opts.tol = -1.0;  // fixed cycle count
  opts.record_sweep_traces = true;
  const BcdRun run = run_bcd(p.cfg, p.channels, p.mask, p.idft, p.batch.sym,
                             opts);

  const int cycles = int(run.objective_trace.size());
  CHECK(cycles == 4);
  CHECK(run.stop_reason == "max_iters");
  CHECK(int(run.mse_trace.size()) == cycles);
  CHECK(int(run.per_block_deltas.size()) == cycles);
  CHECK(int(run.tx.size()) == p.cfg.batch_size);
  CHECK(int(run.v_ps.size()) == p.cfg.batch_size);
  CHECK(int(run.admm_last.size()) == p.cfg.batch_size);
  CHECK(int(run.ps_traces.size()) == cycles * p.cfg.batch_size);
  CHECK(int(run.combiner_traces.size()) == cycles);

  for (int i = 1; i < cycles; ++i)
    CHECK(run.objective_trace[size_t(i)] <=
          run.objective_trace[size_t(i - 1)] +
              1e-9 * std::max(1.0, std::abs(run.objective_trace[size_t(i - 1)])));

  // Every recorded sweep descends stepwise too.
  for (const auto& trace : run.ps_traces)
    for (size_t i = 1; i < trace.size(); ++i)
      CHECK(trace[i] <=
            trace[i - 1] + 1e-9 * std::max(1.0, std::abs(trace[i - 1])));
  for (const auto& trace : run.combiner_traces)
    for (size_t i = 1; i < trace.size(); ++i)
      CHECK(trace[i] <=
            trace[i - 1] + 1e-9 * std::max(1.0, std::abs(trace[i - 1])));

  // The recorded traces match a recomputation at the final iterate.
  std::vector<CxMat> t_final;
  for (const auto& st : run.tx) t_final.push_back(st.t);
  const double plain = evaluate_objective(p.cfg, p.channels, p.map, t_final,
                                          run.v_ps, run.rx, p.batch.sym);
  const double merit = evaluate_objective_regularized(
      p.cfg, p.channels, p.map, t_final, run.v_ps, run.rx, p.batch.sym);
  CHECK(run.mse_trace.back() == doctest::Approx(plain).epsilon(1e-12));
  CHECK(run.objective_trace.back() == doctest::Approx(merit).epsilon(1e-12));

  // Merit minus plain objective is exactly the transmit ridge term.
  const double c = double(p.cfg.n_tx) / double(p.cfg.n_rf_tx);
  const double rw =
      0.5 * (p.cfg.resolved_reg_w() * c + p.cfg.resolved_reg_t());
  double reg = 0.0;
  for (const auto& st : run.tx) reg += st.t.squaredNorm();
  reg  = rw * reg / double(p.cfg.batch_size);
  CHECK(run.objective_trace.back() - run.mse_trace.back() ==
        doctest::Approx(reg).epsilon(1e-10));
}

TEST_CASE("shorter runs are exact prefixes of longer ones") {
  testutil::SmallProblem p = testutil::make_small_problem(12);
  BcdOptions opts;
  opts.tol = -1.0;
  opts.max_outer = 2;
  const BcdRun short_run =
      run_bcd(p.cfg, p.channels, p.mask, p.idft, p.batch.sym, opts);
  opts.max_outer = 4;
  const BcdRun long_run =
      run_bcd(p.cfg, p.channels, p.mask, p.idft, p.batch.sym, opts);

  REQUIRE(long_run.objective_trace.size() == 4);
  REQUIRE(short_run.objective_trace.size() == 2);
  for (int i = 0; i < 2; ++i) {
    CHECK(short_run.objective_trace[size_t(i)] ==
          long_run.objective_trace[size_t(i)]);
    CHECK(short_run.mse_trace[size_t(i)] == long_run.mse_trace[size_t(i)]);
  }

  // Re-running the same configuration replays the identical trajectory.
  opts.max_outer = 2;
  const BcdRun again =
      run_bcd(p.cfg, p.channels, p.mask, p.idft, p.batch.sym, opts);
  CHECK(again.objective_trace == short_run.objective_trace);
  bool same_t = true;
  for (int b = 0; b < p.cfg.batch_size; ++b)
    same_t = same_t &&
             (again.tx[size_t(b)].t.array() == short_run.tx[size_t(b)].t.array())
                 .all();
  CHECK(same_t);
}

TEST_CASE("frozen rf stages keep their initial phases") {
  testutil::SmallProblem p = testutil::make_small_problem(13);
  Rng rng(14);
  BcdOptions opts;
  opts.max_outer = 2;
  opts.tol = -1.0;
  opts.fix_rf = true;
  opts.init_v_ps.assign(size_t(p.cfg.batch_size),
                        CxVec::Ones(p.cfg.n_tx));
  for (auto& v : opts.init_v_ps)
    v = testutil::random_unit_phases(rng, p.cfg.n_tx);
  opts.init_u_rf.resize(size_t(p.cfg.n_users));
  for (auto& u : opts.init_u_rf) {
    u = CxMat(p.cfg.n_rx, p.cfg.n_rf_rx);
    for (int i = 0; i < p.cfg.n_rx; ++i)
      for (int j = 0; j < p.cfg.n_rf_rx; ++j)
        u(i, j) = std::polar(1.0, 2.0 * M_PI * rng.uniform());
  }

  const BcdRun run = run_bcd(p.cfg, p.channels, p.mask, p.idft, p.batch.sym,
                             opts);
  for (int b = 0; b < p.cfg.batch_size; ++b)
    CHECK((run.v_ps[size_t(b)].array() == opts.init_v_ps[size_t(b)].array())
              .all());
  for (int k = 0; k < p.cfg.n_users; ++k)
    CHECK((run.rx.u_rf[size_t(k)].array() == opts.init_u_rf[size_t(k)].array())
              .all());
  CHECK(run.ps_traces.empty());
}

TEST_CASE("restricted connectivity pins unwired combiner entries to zero") {
  testutil::SmallProblem p = testutil::make_small_problem(15);
  BcdOptions opts;
  opts.max_outer = 2;
  opts.tol = -1.0;
  opts.connectivity.assign(
      size_t(p.cfg.n_users),
      Eigen::MatrixXi::Ones(p.cfg.n_rx, p.cfg.n_rf_rx));
  opts.connectivity[0](0, 1) = 0;
  opts.connectivity[1](1, 1) = 0;

  const BcdRun run = run_bcd(p.cfg, p.channels, p.mask, p.idft, p.batch.sym,
                             opts);
  CHECK(run.rx.u_rf[0](0, 1) == cxd(0.0, 0.0));
  CHECK(run.rx.u_rf[1](1, 1) == cxd(0.0, 0.0));
  CHECK(std::abs(std::abs(run.rx.u_rf[0](0, 0)) - 1.0) < 1e-12);
}

TEST_CASE("input sizes are checked up front") {
  testutil::SmallProblem p = testutil::make_small_problem(16);
  auto bad = p.batch.sym;
  bad.pop_back();
  CHECK_THROWS_AS(run_bcd(p.cfg, p.channels, p.mask, p.idft, bad, {}),
                  std::invalid_argument);

  BcdOptions opts;
  opts.init_v_ps.assign(1, CxVec::Ones(p.cfg.n_tx));  // wrong count
  CHECK_THROWS_AS(
      run_bcd(p.cfg, p.channels, p.mask, p.idft, p.batch.sym, opts),
      std::invalid_argument);

  BcdOptions opts2;
  opts2.init_u_rf.assign(1, CxMat::Ones(p.cfg.n_rx, p.cfg.n_rf_rx));
  CHECK_THROWS_AS(
      run_bcd(p.cfg, p.channels, p.mask, p.idft, p.batch.sym, opts2),
      std::invalid_argument);
}

TEST_CASE("phase-error evaluation degrades gracefully to the exact objective") {
  SystemConfig cfg = testutil::small_config();
  const AntennaMap map = make_antenna_map(cfg);
  const ChannelSet channels = testutil::fabricate_channels(cfg, Rng(17), 0.02);
  const Eval e = random_eval_point(cfg, 18);
  const RxState rx = init_rx_state(cfg);

  const double j = evaluate_objective(cfg, channels, map, e.t_per_b,
                                      e.v_per_b, rx, e.symbols);
  Rng r1(19);
  CHECK(phase_error_objective(cfg, channels, map, e.t_per_b, e.v_per_b, rx,
                              e.symbols, 0.0, 50, r1) == j);
  Rng r2(19);
  CHECK(phase_error_objective(cfg, channels, map, e.t_per_b, e.v_per_b, rx,
                              e.symbols, 1e-3, 0, r2) == j);

  // Identical generators give identical averages; errors raise the cost of
  // a converged design only in expectation, so just check determinism and
  // a sane positive value here.
  Rng r3(20);
  Rng r4(20);
  const double a = phase_error_objective(cfg, channels, map, e.t_per_b,
                                         e.v_per_b, rx, e.symbols,
                                         5.0 * M_PI / 180.0, 25, r3);
  const double b = phase_error_objective(cfg, channels, map, e.t_per_b,
                                         e.v_per_b, rx, e.symbols,
                                         5.0 * M_PI / 180.0, 25, r4);
  CHECK(a == b);
  CHECK(a > 0.0);
}
