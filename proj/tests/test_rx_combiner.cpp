#include <doctest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "maskbeam/rx_combiner.hpp"
#include "maskbeam/tx_admm.hpp"

using namespace maskbeam;
using testutil::random_cx;
using testutil::random_unit_phases;

namespace {

struct RxFixture {
  SystemConfig cfg;
  AntennaMap map;
  ChannelSet channels;
  std::vector<CxMat> t_per_b;
  std::vector<CxVec> v_per_b;
  std::vector<std::vector<CxMat>> symbols;  // [b][k]
  TxAverages avg;
};

RxFixture make_rx_fixture(std::uint64_t seed, double noise_var = 0.05) {
  RxFixture f;
  f.cfg = testutil::small_config();
  f.map = make_antenna_map(f.cfg);
  f.channels = testutil::fabricate_channels(f.cfg, Rng(seed), noise_var);
  Rng rng(seed + 1);
  f.t_per_b.resize(size_t(f.cfg.batch_size));
  f.v_per_b.resize(size_t(f.cfg.batch_size));
  f.symbols.resize(size_t(f.cfg.batch_size));
  for (int b = 0; b < f.cfg.batch_size; ++b) {
    f.t_per_b[size_t(b)] =
        random_cx(rng, f.cfg.n_rf_tx, f.cfg.n_subcarriers);
    f.v_per_b[size_t(b)] = random_unit_phases(rng, f.cfg.n_tx);
    f.symbols[size_t(b)].resize(size_t(f.cfg.n_users));
    for (int k = 0; k < f.cfg.n_users; ++k)
      f.symbols[size_t(b)][size_t(k)] =
          random_cx(rng, f.cfg.n_streams, f.cfg.n_subcarriers);
  }
  f.avg = tx_sample_averages(f.cfg, f.map, f.t_per_b, f.v_per_b, f.symbols);
  return f;
}

std::vector<std::vector<CxMat>> random_u_dig(const SystemConfig& cfg,
                                             Rng& rng) {
  std::vector<std::vector<CxMat>> u(size_t(cfg.n_users));
  for (int k = 0; k < cfg.n_users; ++k) {
    u[size_t(k)].resize(size_t(cfg.n_subcarriers));
    for (int s = 0; s < cfg.n_subcarriers; ++s)
      u[size_t(k)][size_t(s)] = random_cx(rng, cfg.n_rf_rx, cfg.n_streams);
  }
  return u;
}

}  // namespace

TEST_CASE("initial state is all-ones on the support with identity slices") {
  SystemConfig cfg = testutil::small_config();
  const RxState rx = init_rx_state(cfg);
  REQUIRE(int(rx.u_rf.size()) == cfg.n_users);
  for (int k = 0; k < cfg.n_users; ++k) {
    CHECK((rx.u_rf[size_t(k)].array() == cxd(1.0, 0.0)).all());
    CHECK((rx.connectivity[size_t(k)].array() == 1).all());
    for (int s = 0; s < cfg.n_subcarriers; ++s) {
      const CxMat eye = CxMat::Identity(cfg.n_rf_rx, cfg.n_streams);
      CHECK((rx.u_dig[size_t(k)][size_t(s)] - eye).norm() == 0.0);
    }
  }

  std::vector<Eigen::MatrixXi> support(
      size_t(cfg.n_users), Eigen::MatrixXi::Ones(cfg.n_rx, cfg.n_rf_rx));
  support[0](1, 0) = 0;
  const RxState masked = init_rx_state(cfg, support);
  CHECK(masked.u_rf[0](1, 0) == cxd(0.0, 0.0));
  CHECK(masked.u_rf[0](0, 0) == cxd(1.0, 0.0));

  std::vector<Eigen::MatrixXi> bad_count(1, support[0]);
  CHECK_THROWS_AS(init_rx_state(cfg, bad_count), std::invalid_argument);
  std::vector<Eigen::MatrixXi> bad_shape(
      size_t(cfg.n_users), Eigen::MatrixXi::Ones(cfg.n_rx + 1, cfg.n_rf_rx));
  CHECK_THROWS_AS(init_rx_state(cfg, bad_shape), std::invalid_argument);
}

TEST_CASE("batch averages match their definitions") {
  RxFixture f = make_rx_fixture(1);
  const int s = 3;
  const int k = 1;
  const int B = f.cfg.batch_size;

  CxMat r_tt = CxMat::Zero(f.cfg.n_tx, f.cfg.n_tx);
  CxMat r_tw = CxMat::Zero(f.cfg.n_tx, f.cfg.n_streams);
  double energy = 0.0;
  for (int b = 0; b < B; ++b) {
    CxVec x(f.cfg.n_tx);
    for (int a = 0; a < f.cfg.n_tx; ++a)
      x[a] = f.v_per_b[size_t(b)][a] *
             f.t_per_b[size_t(b)](f.map.chain_of[size_t(a)], s);
    r_tt += x * x.adjoint();
    r_tw += x * f.symbols[size_t(b)][size_t(k)].col(s).adjoint();
    energy += f.symbols[size_t(b)][size_t(k)].col(s).squaredNorm();
  }
  r_tt /= B;
  r_tw /= B;
  energy /= B;

  CHECK((f.avg.r_tt[s] - r_tt).norm() <= 1e-12 * std::max(1.0, r_tt.norm()));
  CHECK((f.avg.r_tw[size_t(k)][s] - r_tw).norm() <=
        1e-12 * std::max(1.0, r_tw.norm()));
  CHECK(f.avg.sym_energy(k, s) == doctest::Approx(energy).epsilon(1e-12));
}

TEST_CASE("scalar mmse combiner matches the closed form") {
  SystemConfig cfg = testutil::small_config();
  cfg.n_users = 1;
  cfg.n_rx = 1;
  cfg.n_rf_rx = 1;
  cfg.n_streams = 1;
  const AntennaMap map = make_antenna_map(cfg);
  const double nv = 0.02;
  const ChannelSet channels = testutil::fabricate_channels(cfg, Rng(7), nv);

  Rng rng(8);
  std::vector<CxMat> t_per_b(size_t(cfg.batch_size));
  std::vector<CxVec> v_per_b(size_t(cfg.batch_size));
  std::vector<std::vector<CxMat>> symbols(size_t(cfg.batch_size));
  for (int b = 0; b < cfg.batch_size; ++b) {
    t_per_b[size_t(b)] = random_cx(rng, cfg.n_rf_tx, cfg.n_subcarriers);
    v_per_b[size_t(b)] = random_unit_phases(rng, cfg.n_tx);
    symbols[size_t(b)] = {random_cx(rng, 1, cfg.n_subcarriers)};
  }
  std::vector<CxMat> u_rf = {CxMat::Ones(1, 1)};

  const auto u_dig =
      mmse_digital_combiner(cfg, map, channels, t_per_b, v_per_b, symbols,
                            u_rf);
  REQUIRE(int(u_dig.size()) == 1);
  for (int s = 0; s < cfg.n_subcarriers; ++s) {
    cxd num(0.0, 0.0);
    double den = nv;  // |u_rf|^2 = 1
    for (int b = 0; b < cfg.batch_size; ++b) {
      CxVec x(cfg.n_tx);
      for (int a = 0; a < cfg.n_tx; ++a)
        x[a] = v_per_b[size_t(b)][a] *
               t_per_b[size_t(b)](map.chain_of[size_t(a)], s);
      const cxd z = (channels.h[0][size_t(s)] * x)(0, 0);
      num += z * std::conj(symbols[size_t(b)][0](0, s)) / double(cfg.batch_size);
      den += std::norm(z) / cfg.batch_size;
    }
    const cxd expect = num / den;
    CHECK(std::abs(u_dig[0][size_t(s)](0, 0) - expect) <=
          1e-10 * std::max(1.0, std::abs(expect)));
  }
}

TEST_CASE("mmse combiners are stationary points of the user cost") {
  RxFixture f = make_rx_fixture(2);
  std::vector<CxMat> u_rf(size_t(f.cfg.n_users));
  Rng rng(3);
  for (auto& u : u_rf) u = random_cx(rng, f.cfg.n_rx, f.cfg.n_rf_rx);

  const auto u_dig = mmse_digital_combiner(f.cfg, f.map, f.channels,
                                           f.t_per_b, f.v_per_b, f.symbols,
                                           u_rf);

  for (int k = 0; k < f.cfg.n_users; ++k) {
    const double j0 =
        combiner_user_cost(f.cfg, f.channels, f.avg, u_dig, u_rf, k);
    const double eps = 1e-6;
    double grad_sq = 0.0;
    for (int s = 0; s < f.cfg.n_subcarriers; ++s) {
      for (int i = 0; i < f.cfg.n_rf_rx; ++i)
        for (int j = 0; j < f.cfg.n_streams; ++j)
          for (int part = 0; part < 2; ++part) {
            const cxd delta = part == 0 ? cxd(eps, 0.0) : cxd(0.0, eps);
            auto bumped = u_dig;
            bumped[size_t(k)][size_t(s)](i, j) += delta;
            const double jp = combiner_user_cost(f.cfg, f.channels, f.avg,
                                                 bumped, u_rf, k);
            bumped[size_t(k)][size_t(s)](i, j) -= 2.0 * delta;
            const double jm = combiner_user_cost(f.cfg, f.channels, f.avg,
                                                 bumped, u_rf, k);
            const double g = (jp - jm) / (2.0 * eps);
            grad_sq += g * g;
          }
    }
    CHECK(std::sqrt(grad_sq) <= 1e-5 * std::max(1.0, std::abs(j0)));
  }
}

TEST_CASE("entry cost differences follow the beta coefficients") {
  RxFixture f = make_rx_fixture(4);
  Rng rng(5);
  const auto u_dig = random_u_dig(f.cfg, rng);
  std::vector<CxMat> u_rf(size_t(f.cfg.n_users));
  for (auto& u : u_rf) u = random_cx(rng, f.cfg.n_rx, f.cfg.n_rf_rx);

  const int k = 1, a = 0, m = 1;
  CxMat masked = u_rf[size_t(k)];
  masked(a, m) = cxd(0.0, 0.0);
  const auto [b1, b2] = analog_combiner_betas(f.cfg, f.channels, f.avg, u_dig,
                                              masked, k, a, m);

  auto cost_with = [&](cxd entry) {
    auto trial = u_rf;
    trial[size_t(k)](a, m) = entry;
    return combiner_user_cost(f.cfg, f.channels, f.avg, u_dig, trial, k);
  };
  const cxd z = b2 - b1;
  const double scale = std::max(1.0, std::abs(z));
  CHECK(std::abs((cost_with({1.0, 0.0}) - cost_with({-1.0, 0.0})) -
                 4.0 * z.real()) <= 1e-9 * scale);
  CHECK(std::abs((cost_with({0.0, 1.0}) - cost_with({0.0, -1.0})) -
                 4.0 * z.imag()) <= 1e-9 * scale);

  // The sweep's update direction is the exact minimizer over the unit circle.
  const cxd best = -z / std::abs(z);
  const double f_best = cost_with(best);
  for (int grid = 0; grid < 64; ++grid) {
    const cxd cand = std::polar(1.0, 2.0 * M_PI * grid / 64.0);
    CHECK(f_best <= cost_with(cand) + 1e-9 * std::max(1.0, std::abs(f_best)));
  }
}

TEST_CASE("combiner sweep descends at every recorded step") {
  RxFixture f = make_rx_fixture(6);
  Rng rng(7);
  const auto u_dig = random_u_dig(f.cfg, rng);
  RxState rx = init_rx_state(f.cfg);

  std::vector<double> trace;
  CombinerSweepOptions opts;
  opts.n_sweeps = 4;
  analog_combiner_sweep(f.cfg, f.channels, f.avg, u_dig, rx.u_rf,
                        rx.connectivity, opts, &trace);
  REQUIRE(trace.size() >= 2);
  for (size_t i = 1; i < trace.size(); ++i)
    CHECK(trace[i] <= trace[i - 1] + 1e-9 * std::max(1.0, std::abs(trace[i - 1])));

  // Wired entries end unit modulus.
  for (int k = 0; k < f.cfg.n_users; ++k)
    for (int a = 0; a < f.cfg.n_rx; ++a)
      for (int m = 0; m < f.cfg.n_rf_rx; ++m)
        CHECK(std::abs(std::abs(rx.u_rf[size_t(k)](a, m)) - 1.0) < 1e-12);
}

TEST_CASE("unwired entries stay zero and converged sweeps are stationary") {
  RxFixture f = make_rx_fixture(8);
  Rng rng(9);
  const auto u_dig = random_u_dig(f.cfg, rng);

  std::vector<Eigen::MatrixXi> support(
      size_t(f.cfg.n_users), Eigen::MatrixXi::Ones(f.cfg.n_rx, f.cfg.n_rf_rx));
  support[0](0, 1) = 0;
  support[1](1, 0) = 0;
  RxState rx = init_rx_state(f.cfg, support);

  CombinerSweepOptions opts;
  opts.n_sweeps = 200;
  opts.tol = 0.0;  // run to a full fixed point of the sweep
  analog_combiner_sweep(f.cfg, f.channels, f.avg, u_dig, rx.u_rf,
                        rx.connectivity, opts, nullptr);

  CHECK(rx.u_rf[0](0, 1) == cxd(0.0, 0.0));
  CHECK(rx.u_rf[1](1, 0) == cxd(0.0, 0.0));

  const double fade = 1.0;
  for (int k = 0; k < f.cfg.n_users; ++k) {
    for (int a = 0; a < f.cfg.n_rx; ++a)
      for (int m = 0; m < f.cfg.n_rf_rx; ++m) {
        if (support[size_t(k)](a, m) == 0) continue;
        CxMat masked = rx.u_rf[size_t(k)];
        masked(a, m) = cxd(0.0, 0.0);
        const auto [b1, b2] = analog_combiner_betas(f.cfg, f.channels, f.avg,
                                                    u_dig, masked, k, a, m);
        const cxd y = fade * b2 - b1;
        if (std::abs(y) == 0.0) continue;
        // Cyclic sweeps converge linearly; 200 of them land near 1e-8.
        CHECK(std::abs(rx.u_rf[size_t(k)](a, m) + y / std::abs(y)) <= 1e-6);
      }
  }
}

TEST_CASE("robust update fades the quadratic coefficient") {
  RxFixture f = make_rx_fixture(10);
  Rng rng(11);
  const auto u_dig = random_u_dig(f.cfg, rng);
  RxState nominal = init_rx_state(f.cfg);
  RxState robust = init_rx_state(f.cfg);

  CombinerSweepOptions nopts;
  analog_combiner_sweep(f.cfg, f.channels, f.avg, u_dig, nominal.u_rf,
                        nominal.connectivity, nopts, nullptr);

  CombinerSweepOptions zopts;
  zopts.sigma_e = 0.0;
  analog_combiner_sweep(f.cfg, f.channels, f.avg, u_dig, robust.u_rf,
                        robust.connectivity, zopts, nullptr);

  // sigma = 0 reproduces the nominal rule bit for bit.
  for (int k = 0; k < f.cfg.n_users; ++k)
    CHECK((nominal.u_rf[size_t(k)].array() == robust.u_rf[size_t(k)].array())
              .all());

  // A large sigma changes the outcome.
  RxState faded = init_rx_state(f.cfg);
  CombinerSweepOptions fopts;
  fopts.sigma_e = 0.6;
  analog_combiner_sweep(f.cfg, f.channels, f.avg, u_dig, faded.u_rf,
                        faded.connectivity, fopts, nullptr);
  CHECK_FALSE((faded.u_rf[0].array() == nominal.u_rf[0].array()).all());
}
